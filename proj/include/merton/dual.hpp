// Static (dual) verification: the state-price density, budget feasibility,
// the first-order condition tying the candidate consumption to the density,
// and the duality upper bound on any attainable value.
#pragma once

#include <vector>

#include "merton/closed_form.hpp"
#include "merton/market.hpp"
#include "merton/path_engine.hpp"

namespace merton {

// zeta_t = exp(-lambda W_t - (r + lambda^2/2) t) per path, computed exactly
// from the Brownian levels of a batch.
struct StatePriceDensityPath {
    std::vector<double> times;
    std::vector<double> zeta;
    std::int64_t n_paths = 0;

    double at(std::int64_t path, std::int64_t k) const {
        return zeta[static_cast<std::size_t>(path) * times.size() + static_cast<std::size_t>(k)];
    }
};

StatePriceDensityPath state_price_density(const PathBatch& batch, const MarketParams& m);

// x - E[ int_0^T zeta_s C_s ds ] (trapezoidal). >= 0 within noise for any
// admissible consumption; ~ 0 for the candidate optimum, whose analytic tail
// x e^{-eta T} is subtracted when the batch is tagged optimal.
McEstimate budget_gap(double x, const PathBatch& batch, const StatePriceDensityPath& spd,
                      const SimConfig& cfg);

// max over paths and grid points of
// |e^{-delta t} U'(C_t) - V_x(x) zeta_t| / (V_x(x) zeta_t).
// A pathwise algebraic identity under exact constant-policy simulation;
// requires a batch tagged as optimal-policy output.
double foc_residual(double x, const PathBatch& batch, const StatePriceDensityPath& spd,
                    const ClosedFormSolution& sol);

// Slack V(x) - J(C) estimated through mc_value; >= 0 within noise for every
// policy and ~ 0 for the optimal one.
McEstimate duality_upper_bound(double x, const Policy& policy, const SimConfig& cfg,
                               const MarketParams& m, const AgentParams& a,
                               const ClosedFormSolution& sol);

} // namespace merton
