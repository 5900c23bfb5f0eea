#include "merton/hjb.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace merton {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ValueFn value_fn(const ClosedFormSolution& sol) {
    return [sol](double x) {
        return ValueBundle{sol.value(x), sol.value_dx(x), sol.value_dxx(x)};
    };
}

ValueFn value_fn(const ShiftedValue& sv) {
    return [sv](double x) {
        return ValueBundle{sv.value(x), sv.value_dx(x), sv.value_dxx(x)};
    };
}

double utility(double c, const AgentParams& a) {
    if (c < 0.0 || !std::isfinite(c)) {
        throw std::invalid_argument("consumption must be a finite nonnegative rate");
    }
    if (a.log_utility()) {
        return c > 0.0 ? std::log(c) : -kInf;
    }
    if (c == 0.0) {
        // 0^{1-R} is 0 for R < 1 and +inf for R > 1, so U(0) is 0 resp. -inf.
        return a.R < 1.0 ? 0.0 : -kInf;
    }
    return pow_pos(c, 1.0 - a.R) / (1.0 - a.R);
}

double L(double pi, double c, double x, const ValueBundle& vb,
         const MarketParams& m, const AgentParams& a) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("x must be > 0");
    }
    const double u = utility(c, a);
    if (u == -kInf) {
        return -kInf;
    }
    const double lambda = m.sharpe();
    return u - a.delta * vb.v + (x * (m.r + m.sigma * lambda * pi) - c) * vb.v_x
         + 0.5 * m.sigma * m.sigma * pi * pi * x * x * vb.v_xx;
}

Maximizer maximize_L(double x, const ValueBundle& vb,
                     const MarketParams& m, const AgentParams& a) {
    if (!(vb.v_x > 0.0) || !(vb.v_xx < 0.0)) {
        throw std::invalid_argument("maximize_L needs v_x > 0 and v_xx < 0");
    }
    const double lambda = m.sharpe();
    const double pi_star = -(lambda / m.sigma) * vb.v_x / (x * vb.v_xx);
    const double c_star = a.log_utility() ? 1.0 / vb.v_x : pow_pos(vb.v_x, -1.0 / a.R);
    return {pi_star, c_star, L(pi_star, c_star, x, vb, m, a)};
}

double hjb_residual(const ValueFn& fn, std::span<const double> x_grid,
                    const MarketParams& m, const AgentParams& a) {
    if (x_grid.empty()) {
        throw std::invalid_argument("x_grid must be nonempty");
    }
    double worst = 0.0;
    for (double x : x_grid) {
        if (!(x > 0.0)) {
            throw std::invalid_argument("grid points must be > 0");
        }
        const ValueBundle vb = fn(x);
        const double res = std::fabs(maximize_L(x, vb, m, a).L_star)
                           / std::max(1.0, std::fabs(vb.v));
        worst = std::max(worst, res);
    }
    return worst;
}

double hjb_residual(const ClosedFormSolution& sol, std::span<const double> x_grid,
                    const MarketParams& m, const AgentParams& a) {
    return hjb_residual(value_fn(sol), x_grid, m, a);
}

double L_eps(double pi, double c, double x, double y, double eps,
             const ValueBundle& vb_at_z, const MarketParams& m, const AgentParams& a) {
    const double z = x + eps * y;
    if (!(z > 0.0)) {
        throw std::invalid_argument("x + eps*y must be > 0");
    }
    const double et = eta(m, a); // rejects R == 1
    const double lambda = m.sharpe();
    const double u = utility(c + eps * et * y, a);
    if (u == -kInf) {
        return -kInf;
    }
    // Drift weight on eps*y is r + lambda^2/R - eta: the growth rate of the
    // optimally managed unit-wealth stream net of its consumption.
    const double diff = m.sigma * pi * x + lambda * eps * y / a.R;
    return u - a.delta * vb_at_z.v
         + (x * (m.r + pi * m.sigma * lambda) - c
            + (m.r + lambda * lambda / a.R - et) * eps * y) * vb_at_z.v_x
         + 0.5 * diff * diff * vb_at_z.v_xx;
}

double davis_norman_residual(double zeta, double x,
                             const MarketParams& m, const AgentParams& a) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("x must be > 0");
    }
    const ShiftedValue sv = davis_norman_value(zeta, m, a);
    const ValueBundle vb{sv.value(x), sv.value_dx(x), sv.value_dxx(x)};
    const double sup = maximize_L(x, vb, m, a).L_star;
    const double bound = -m.r * zeta * sv.value_dx(x);
    return sup - bound;
}

} // namespace merton
