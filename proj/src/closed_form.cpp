#include "merton/closed_form.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace merton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be a positive finite real");
    }
}

} // namespace

double pow_pos(double x, double e) {
    require_positive(x, "base");
    return std::exp(e * std::log(x));
}

double ClosedFormSolution::value(double x) const {
    require_positive(x, "x");
    if (log_utility) {
        return (delta * std::log(delta * x) + kappa - delta) / (delta * delta);
    }
    return eta_pow_negR * pow_pos(x, 1.0 - R) / (1.0 - R);
}

double ClosedFormSolution::value_dx(double x) const {
    require_positive(x, "x");
    if (log_utility) {
        return 1.0 / (delta * x);
    }
    return eta_pow_negR * pow_pos(x, -R);
}

double ClosedFormSolution::value_dxx(double x) const {
    require_positive(x, "x");
    if (log_utility) {
        return -1.0 / (delta * x * x);
    }
    return -R * eta_pow_negR * pow_pos(x, -R - 1.0);
}

double F(double pi, double xi, const MarketParams& m, const AgentParams& a) {
    if (a.log_utility()) {
        throw std::invalid_argument("F is a CRRA (R != 1) quantity");
    }
    const double lambda = m.sharpe();
    return a.delta
         - (1.0 - a.R) * (m.r + lambda * m.sigma * pi
                          - pi * pi * m.sigma * m.sigma * a.R / 2.0 - xi);
}

double constant_policy_value(double pi, double xi, double x,
                             const MarketParams& m, const AgentParams& a) {
    if (a.log_utility()) {
        throw std::invalid_argument("constant_policy_value is a CRRA (R != 1) quantity");
    }
    require_positive(xi, "xi");
    require_positive(x, "x");
    const double f = F(pi, xi, m, a);
    if (f <= 0.0) {
        // The discounted utility integral has no finite value; its sign is the
        // sign of the utility.
        return a.R < 1.0 ? kInf : -kInf;
    }
    return pow_pos(x, 1.0 - a.R) / (1.0 - a.R) * pow_pos(xi, 1.0 - a.R) / f;
}

ClosedFormSolution merton_solution(const MarketParams& m, const AgentParams& a) {
    const WellPosedness cls = classify(m, a);
    if (!cls.well_posed()) {
        std::ostringstream msg;
        msg << "problem is ill-posed (" << to_string(cls.tag) << ")";
        throw IllPosedError(cls, msg.str());
    }
    const double lambda = m.sharpe();
    ClosedFormSolution sol;
    sol.R = a.R;
    sol.delta = a.delta;
    if (a.log_utility()) {
        sol.log_utility = true;
        sol.pi_hat = lambda / m.sigma;
        sol.xi_hat = a.delta;
        sol.kappa = m.r + lambda * lambda / 2.0;
    } else {
        sol.pi_hat = (m.mu - m.r) / (m.sigma * m.sigma * a.R);
        sol.xi_hat = cls.rate;
        sol.eta_pow_negR = pow_pos(cls.rate, -a.R);
    }
    return sol;
}

double perturbed_value(double eps, double x, const MarketParams& m, const AgentParams& a) {
    require_positive(eps, "eps");
    require_positive(x, "x");
    if (a.log_utility()) {
        throw std::invalid_argument("perturbed_value requires R != 1");
    }
    return merton_solution(m, a).value(x + eps);
}

ShiftedValue davis_norman_value(double zeta, const MarketParams& m, const AgentParams& a) {
    require_positive(zeta, "zeta");
    if (a.log_utility()) {
        throw std::invalid_argument("davis_norman_value requires R != 1");
    }
    return ShiftedValue{merton_solution(m, a), zeta};
}

double klss_nu(const MarketParams& m, const AgentParams& a) {
    if (!(a.R > 1.0) || !(a.delta > 0.0) || !(m.r > 0.0)) {
        throw std::invalid_argument("bankruptcy solution needs R > 1, delta > 0, r > 0");
    }
    const double lambda = m.sharpe();
    const double qa = lambda * lambda / 2.0;
    const double qb = (m.r - a.delta - lambda * lambda / 2.0) * a.R;
    const double qc = -m.r * a.R * a.R;
    if (qa == 0.0) {
        if (qb == 0.0) {
            throw std::invalid_argument("characteristic equation degenerates: lambda = 0, r = delta");
        }
        const double root = -qc / qb;
        if (!(root < 0.0)) {
            throw std::invalid_argument("lambda = 0 and delta <= r: no negative root");
        }
        return root;
    }
    // qc < 0, so the roots straddle zero; the negative one is wanted.
    const double disc = qb * qb - 4.0 * qa * qc;
    return (-qb - std::sqrt(disc)) / (2.0 * qa);
}

double BankruptcyValue::forward(double c) const {
    require_positive(c, "c");
    return (c - A * pow_pos(c, nu)) / eta;
}

double BankruptcyValue::consumption(double x) const {
    require_positive(x, "x");
    // forward() is strictly increasing from -inf to +inf; bracket from eta*x
    // (the no-bankruptcy consumption) and close in with bisection sharpened by
    // secant steps.
    double lo = eta * x, hi = eta * x;
    double flo = forward(lo) - x, fhi = flo;
    for (int i = 0; i < 200 && flo > 0.0; ++i) {
        hi = lo;
        fhi = flo;
        lo /= 2.0;
        flo = forward(lo) - x;
    }
    for (int i = 0; i < 200 && fhi < 0.0; ++i) {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = forward(hi) - x;
    }
    if (flo > 0.0 || fhi < 0.0) {
        std::ostringstream msg;
        msg << "consumption inversion failed to bracket: I(" << lo << ")-x=" << flo
            << ", I(" << hi << ")-x=" << fhi;
        throw std::runtime_error(msg.str());
    }
    for (int iter = 0; iter < 200; ++iter) {
        // Secant proposal on even iterations, forced bisection on odd ones so
        // the bracket width provably halves.
        double mid = (iter % 2 == 0 && fhi != flo)
                         ? lo - flo * (hi - lo) / (fhi - flo)
                         : 0.5 * (lo + hi);
        if (!(mid > lo) || !(mid < hi)) {
            mid = 0.5 * (lo + hi);
        }
        const double fmid = forward(mid) - x;
        if (fmid == 0.0) {
            return mid;
        }
        if (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
        if (hi - lo <= 1e-12 * (0.5 * (lo + hi))) {
            return 0.5 * (lo + hi);
        }
    }
    std::ostringstream msg;
    msg << "consumption inversion did not converge: bracket [" << lo << ", " << hi
        << "], f = [" << flo << ", " << fhi << "]";
    throw std::runtime_error(msg.str());
}

double BankruptcyValue::value(double x) const {
    const double c = consumption(x);
    return nu / (eta * (R - nu)) * A * pow_pos(c, nu - R)
         + pow_pos(c, 1.0 - R) / (eta * (1.0 - R));
}

BankruptcyValue klss_solution(double P, const MarketParams& m, const AgentParams& a) {
    if (!(P < 0.0) || !std::isfinite(P)) {
        throw std::invalid_argument("P must be a finite negative bankruptcy value");
    }
    const double nu = klss_nu(m, a); // also enforces the regime
    const double e = eta(m, a);
    // Base of the fractional power; positive on the valid regime
    // ((1-R)P > 0, R - nu > 0, 1 - nu > 0). Guard anyway: a complex branch
    // must never be taken silently.
    const double base = e / a.R * (a.R - nu) / (1.0 - nu) * (1.0 - a.R) * P;
    if (!(base > 0.0)) {
        std::ostringstream msg;
        msg << "bankruptcy coefficient base is not positive (" << base
            << "); parameters leave the supported regime";
        throw std::runtime_error(msg.str());
    }
    BankruptcyValue bv;
    bv.P = P;
    bv.nu = nu;
    bv.eta = e;
    bv.R = a.R;
    bv.A = pow_pos(base, (1.0 - nu) / (1.0 - a.R));
    return bv;
}

double klss_value(double P, double x, const MarketParams& m, const AgentParams& a) {
    return klss_solution(P, m, a).value(x);
}

} // namespace merton
