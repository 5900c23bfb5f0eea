#include "merton/dual.hpp"

#include <cmath>
#include <stdexcept>

namespace merton {

StatePriceDensityPath state_price_density(const PathBatch& batch, const MarketParams& m) {
    if (batch.W.empty()) {
        throw std::invalid_argument("batch carries no Brownian levels");
    }
    const double lambda = m.sharpe();
    const double decay = m.r + lambda * lambda / 2.0;
    StatePriceDensityPath spd;
    spd.times = batch.times;
    spd.n_paths = batch.n_paths;
    spd.zeta.resize(batch.W.size());
    const std::size_t width = batch.times.size();
    parallel_for_paths(batch.n_paths, [&](std::int64_t p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        for (std::size_t k = 0; k < width; ++k) {
            spd.zeta[row + k] = std::exp(-lambda * batch.W[row + k] - decay * batch.times[k]);
        }
    });
    return spd;
}

McEstimate budget_gap(double x, const PathBatch& batch, const StatePriceDensityPath& spd,
                      const SimConfig& cfg) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("x must be > 0");
    }
    if (spd.zeta.size() != batch.C.size() || spd.times.size() != batch.times.size()) {
        throw std::invalid_argument("state-price density does not match the batch");
    }
    const std::size_t width = batch.times.size();
    std::vector<double> gaps(static_cast<std::size_t>(batch.n_paths));
    parallel_for_paths(batch.n_paths, [&](std::int64_t p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        double acc = 0.0;
        double prev = spd.zeta[row] * batch.C[row];
        for (std::size_t k = 1; k < width; ++k) {
            const double cur = spd.zeta[row + k] * batch.C[row + k];
            acc += 0.5 * (prev + cur) * (batch.times[k] - batch.times[k - 1]);
            prev = cur;
        }
        gaps[static_cast<std::size_t>(p)] = x - acc;
    });
    McEstimate e = summarize(gaps, batch.antithetic);
    if (batch.constant_policy && batch.constant_policy->optimal) {
        // E[zeta_t C_t] = x eta e^{-eta t} for the optimal stream, so the
        // truncated part of the budget integral is x e^{-eta T}.
        const double tail = x * std::exp(-batch.constant_policy->xi * batch.times.back());
        e.mean -= tail;
        e.ci95_lo -= tail;
        e.ci95_hi -= tail;
        e.tail_bound = tail;
    }
    (void)cfg;
    return e;
}

double foc_residual(double x, const PathBatch& batch, const StatePriceDensityPath& spd,
                    const ClosedFormSolution& sol) {
    if (!batch.constant_policy || !batch.constant_policy->optimal) {
        throw std::invalid_argument("foc_residual needs a batch tagged as optimal-policy output");
    }
    if (spd.zeta.size() != batch.C.size()) {
        throw std::invalid_argument("state-price density does not match the batch");
    }
    const double vx = sol.value_dx(x);
    const std::size_t width = batch.times.size();
    std::vector<double> worst(static_cast<std::size_t>(batch.n_paths), 0.0);
    parallel_for_paths(batch.n_paths, [&](std::int64_t p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        double w = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
            const double c = batch.C[row + k];
            const double marginal = sol.log_utility ? 1.0 / c : pow_pos(c, -sol.R);
            const double lhs = std::exp(-sol.delta * batch.times[k]) * marginal;
            const double rhs = vx * spd.zeta[row + k];
            w = std::max(w, std::fabs(lhs - rhs) / rhs);
        }
        worst[static_cast<std::size_t>(p)] = w;
    });
    double res = 0.0;
    for (double v : worst) {
        res = std::max(res, v);
    }
    return res;
}

McEstimate duality_upper_bound(double x, const Policy& policy, const SimConfig& cfg,
                               const MarketParams& m, const AgentParams& a,
                               const ClosedFormSolution& sol) {
    const McEstimate value = mc_value(x, policy, cfg, m, a);
    McEstimate slack = value;
    slack.mean = sol.value(x) - value.mean;
    slack.ci95_lo = slack.mean - 1.96 * slack.std_error;
    slack.ci95_hi = slack.mean + 1.96 * slack.std_error;
    return slack;
}

} // namespace merton
