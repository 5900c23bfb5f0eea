#include "merton/market.hpp"

#include <cmath>

namespace merton {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be finite");
    }
}

} // namespace

MarketParams::MarketParams(double r_, double mu_, double sigma_)
    : r(r_), mu(mu_), sigma(sigma_) {
    require_finite(r, "r");
    require_finite(mu, "mu");
    require_finite(sigma, "sigma");
    if (sigma <= 0.0) {
        throw std::invalid_argument("sigma must be > 0");
    }
}

AgentParams::AgentParams(double R_, double delta_) : R(R_), delta(delta_) {
    require_finite(R, "R");
    require_finite(delta, "delta");
    if (R <= 0.0) {
        throw std::invalid_argument("R must be > 0");
    }
}

const char* to_string(Posedness tag) {
    switch (tag) {
        case Posedness::WellPosed: return "well_posed";
        case Posedness::IllPosedPlusInfinity: return "ill_posed_plus_infinity";
        case Posedness::IllPosedMinusInfinity: return "ill_posed_minus_infinity";
    }
    return "unknown";
}

IllPosedError::IllPosedError(const WellPosedness& cls, const std::string& what)
    : std::domain_error(what), cls_(cls) {}

double sharpe_ratio(const MarketParams& m) { return m.sharpe(); }

double eta(const MarketParams& m, const AgentParams& a) {
    if (a.log_utility()) {
        throw std::invalid_argument("eta is undefined for R == 1; use the log-utility branch");
    }
    const double lambda = m.sharpe();
    return (a.delta - (1.0 - a.R) * (m.r + lambda * lambda / (2.0 * a.R))) / a.R;
}

WellPosedness classify(const MarketParams& m, const AgentParams& a) {
    if (a.log_utility()) {
        // Well posed iff delta > 0; otherwise the sign of kappa = r + lambda^2/2
        // decides which infinity the value takes.
        if (a.delta > 0.0) {
            return {Posedness::WellPosed, a.delta, std::fabs(a.delta)};
        }
        const double lambda = m.sharpe();
        const double kappa = m.r + lambda * lambda / 2.0;
        const Posedness tag = kappa > 0.0 ? Posedness::IllPosedPlusInfinity
                                          : Posedness::IllPosedMinusInfinity;
        return {tag, a.delta, std::fabs(a.delta)};
    }
    const double e = eta(m, a);
    if (e > 0.0) {
        return {Posedness::WellPosed, e, std::fabs(e)};
    }
    const Posedness tag = a.R < 1.0 ? Posedness::IllPosedPlusInfinity
                                    : Posedness::IllPosedMinusInfinity;
    return {tag, e, std::fabs(e)};
}

std::pair<MarketParams, AgentParams>
numeraire_shift(const MarketParams& m, const AgentParams& a, double gamma) {
    if (!std::isfinite(gamma)) {
        throw std::invalid_argument("gamma must be finite");
    }
    return {MarketParams(m.r + gamma, m.mu + gamma, m.sigma),
            AgentParams(a.R, a.delta - (a.R - 1.0) * gamma)};
}

double impatience_rate(const MarketParams& m, const AgentParams& a) {
    return a.delta + m.r * (a.R - 1.0);
}

} // namespace merton
