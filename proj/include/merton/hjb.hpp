// The generator-plus-reward operator L, its closed-form maximizers, residual
// verification on grids, the perturbed operator, and the shifted-value residual
// identity.
#pragma once

#include <functional>
#include <span>

#include "merton/closed_form.hpp"
#include "merton/market.hpp"

namespace merton {

// A function value and its first two derivatives at a point. Candidate-value
// inputs satisfy v_x > 0, v_xx < 0.
struct ValueBundle {
    double v;
    double v_x;
    double v_xx;
};

using ValueFn = std::function<ValueBundle(double x)>;

ValueFn value_fn(const ClosedFormSolution& sol);
ValueFn value_fn(const ShiftedValue& sv);

// U(c) with the conventions 0^{1-R} = +inf for R > 1 (so U(0) = -inf) and
// U(0) = 0 for R < 1; log(0) = -inf.
double utility(double c, const AgentParams& a);

// L(pi, c; x, v) = U(c) - delta v + (x(r + sigma lambda pi) - c) v_x
//                + (sigma^2/2) pi^2 x^2 v_xx.
double L(double pi, double c, double x, const ValueBundle& vb,
         const MarketParams& m, const AgentParams& a);

struct Maximizer {
    double pi_star;
    double c_star;
    double L_star;
};

// Closed-form maximizers pi* = -(lambda/sigma) v_x / (x v_xx), c* = v_x^{-1/R}
// (1/v_x for log), and the value of L there. Requires v_x > 0, v_xx < 0.
Maximizer maximize_L(double x, const ValueBundle& vb,
                     const MarketParams& m, const AgentParams& a);

// max over the grid of |sup_{pi,c} L(pi,c;x,v)| / max(1, |v(x)|).
double hjb_residual(const ValueFn& fn, std::span<const double> x_grid,
                    const MarketParams& m, const AgentParams& a);
double hjb_residual(const ClosedFormSolution& sol, std::span<const double> x_grid,
                    const MarketParams& m, const AgentParams& a);

// Perturbed operator, with z = x + eps y and vb evaluated at z:
// L_eps = U(c + eps eta y) - delta v
//       + [x(r + pi sigma lambda) - c + (r + lambda^2/R - eta) eps y] v_z
//       + (1/2)(sigma pi x + lambda eps y / R)^2 v_zz.
// Reduces exactly to L(pi x/z + lambda eps y/(sigma R z), c + eps eta y; z, v).
double L_eps(double pi, double c, double x, double y, double eps,
             const ValueBundle& vb_at_z, const MarketParams& m, const AgentParams& a);

// sup_{pi,c} L(pi,c;x,V^zeta) - ( -r zeta V_x(x + zeta) ); identically zero in
// exact arithmetic for the candidate solution.
double davis_norman_residual(double zeta, double x,
                             const MarketParams& m, const AgentParams& a);

} // namespace merton
