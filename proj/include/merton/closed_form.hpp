// Closed-form objects of the problem: the value of constant proportional
// strategies, the candidate optimal solution for CRRA and log utility, its
// perturbations, and the bankruptcy-value solution with its consumption map.
#pragma once

#include <stdexcept>

#include "merton/market.hpp"

namespace merton {

// Candidate solution (pi_hat, xi_hat, V) with first and second derivatives.
// CRRA: V(x) = eta^{-R} x^{1-R} / (1-R). Log: V(x) = (delta log(delta x)
// + r + lambda^2/2 - delta) / delta^2.
struct ClosedFormSolution {
    double pi_hat = 0.0;
    double xi_hat = 0.0;
    double R = 0.0;
    double delta = 0.0;
    bool log_utility = false;
    double kappa = 0.0;      // r + lambda^2/2, used by the log branch
    double eta_pow_negR = 0.0; // eta^{-R}, used by the CRRA branch

    double value(double x) const;
    double value_dx(double x) const;    // > 0 for x > 0
    double value_dxx(double x) const;   // < 0 for x > 0
};

// The shifted function x -> V(x + shift) used by the bounded-from-below
// perturbation argument.
struct ShiftedValue {
    ClosedFormSolution sol;
    double shift = 0.0;

    double value(double x) const { return sol.value(x + shift); }
    double value_dx(double x) const { return sol.value_dx(x + shift); }
    double value_dxx(double x) const { return sol.value_dxx(x + shift); }
};

// Decay rate of the discounted moment of a constant proportional strategy:
// F(pi, xi) = delta - (1-R)(r + lambda sigma pi - pi^2 sigma^2 R / 2 - xi).
// R != 1 only.
double F(double pi, double xi, const MarketParams& m, const AgentParams& a);

// J(xi X) for the constant proportional strategy (pi, xi) and initial wealth x:
// x^{1-R}/(1-R) * xi^{1-R}/F when F > 0, otherwise +inf (R < 1) or -inf (R > 1).
double constant_policy_value(double pi, double xi, double x,
                             const MarketParams& m, const AgentParams& a);

// The candidate optimal solution. Throws IllPosedError when classify() is not
// WellPosed.
ClosedFormSolution merton_solution(const MarketParams& m, const AgentParams& a);

// Value of the stochastically perturbed problem: V_eps(x) = V(x + eps).
double perturbed_value(double eps, double x, const MarketParams& m, const AgentParams& a);

// V^zeta(x) = V(x + zeta) with derivatives; zeta > 0.
ShiftedValue davis_norman_value(double zeta, const MarketParams& m, const AgentParams& a);

// Solution of the problem with finite bankruptcy value P < 0 (regime R > 1,
// delta > 0, r > 0). The optimal consumption C(x) inverts the strictly
// increasing map I(c) = (c - A c^nu) / eta; the value function is evaluated
// from it in closed form.
struct BankruptcyValue {
    double P = 0.0;   // bankruptcy value, < 0
    double nu = 0.0;  // negative root of the characteristic quadratic
    double A = 0.0;   // coefficient of c^nu in eta * I(c)
    double eta = 0.0;
    double R = 0.0;

    double forward(double c) const;      // I(c), strictly increasing on (0, inf)
    double consumption(double x) const;  // inverse of forward, bracketed root find
    double value(double x) const;        // V^P(x); -> P as x -> 0, -> V(x) as P -> -inf
};

// Negative root of (lambda^2/2) z^2 + (r - delta - lambda^2/2) R z - r R^2 = 0.
// lambda == 0 degenerates to a linear equation; if that has no negative root
// the regime is rejected.
double klss_nu(const MarketParams& m, const AgentParams& a);

BankruptcyValue klss_solution(double P, const MarketParams& m, const AgentParams& a);

// Convenience: klss_solution(P, m, a).value(x).
double klss_value(double P, double x, const MarketParams& m, const AgentParams& a);

// exp(e * log(x)) for x > 0; keeps fractional powers off the generic pow path.
double pow_pos(double x, double e);

} // namespace merton
