// Path simulation: exact sampling of constant proportional strategies,
// Euler-Maruyama for general rules, Monte Carlo estimation of the objective,
// probes for the positivity/supermartingale/transversality conditions, and the
// two strategies whose stochastic integral fails to be a supermartingale.
//
// Determinism contract: every output is a pure function of (config, inputs).
// Draws are keyed by (seed, path, step), per-path results are stored by path
// index and reduced in index order, so results are bitwise identical for any
// worker count (workers come from MERTON_THREADS, default hardware
// concurrency).
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "merton/closed_form.hpp"
#include "merton/market.hpp"

namespace merton {

struct SimConfig {
    std::uint64_t seed = 12345;
    std::int64_t n_paths = 10000;
    double dt = 0.01;
    double horizon = 1.0;
    bool antithetic = true;

    // horizon/dt must be a whole number of steps; antithetic needs n_paths even.
    void validate() const;
    std::int64_t n_steps() const;
};

// What the simulated paths of one run look like on the time grid. Row-major
// n_paths x (n_steps+1) matrices. A path that hits zero wealth is absorbed:
// X and C stay zero from that grid point on (absorbed_at records the time,
// NaN if never). W is the driving Brownian motion and keeps evolving.
struct PathBatch {
    std::vector<double> times;
    std::vector<double> W;
    std::vector<double> X;
    std::vector<double> C;
    std::vector<double> absorbed_at;
    std::int64_t n_paths = 0;
    double x0 = 0.0;
    bool antithetic = false;

    // Set by simulate_constant_policy; used for analytic tails and for the
    // checks that only make sense on optimal-policy output.
    struct ConstantPolicyInfo {
        double pi = 0.0;
        double xi = 0.0;
        bool optimal = false;
    };
    std::optional<ConstantPolicyInfo> constant_policy;

    std::int64_t n_times() const { return static_cast<std::int64_t>(times.size()); }
    double at(const std::vector<double>& mat, std::int64_t path, std::int64_t k) const {
        return mat[static_cast<std::size_t>(path) * times.size() + static_cast<std::size_t>(k)];
    }
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double ci95_lo = 0.0;
    double ci95_hi = 0.0;
    std::int64_t n_effective = 0;
    std::optional<double> tail_bound; // analytic truncation remainder, when known
    bool divergent = false;           // objective has no finite limit as T grows
    bool horizon_warning = false;     // truncation not negligible / tail unknown
};

// Per-step view handed to general rules; entries [0..k] are populated.
struct PathHistory {
    std::span<const double> times;
    std::span<const double> W;
    std::span<const double> X;
    std::int64_t k = 0;
};

struct PolicyConstant {
    double pi = 0.0;
    double xi = 0.0; // consumption fraction per unit time, >= 0
};

// rule(t, x, history) -> (investment fraction, consumption rate C_t >= 0)
struct PolicyRule {
    std::function<std::pair<double, double>(double, double, const PathHistory&)> rule;
};

// Supermartingale-failure strategies (R > 1, mu >= r > 0).
struct PolicyWildInvestment {};
struct PolicyFastConsumption {};

using Policy = std::variant<PolicyConstant, PolicyRule, PolicyWildInvestment, PolicyFastConsumption>;

// Exact sampling of X_t = x exp(pi sigma W_t + (r + pi(mu-r) - xi
// - pi^2 sigma^2/2) t) on the grid; no discretization bias in X given W.
PathBatch simulate_constant_policy(double x, double pi, double xi, const SimConfig& cfg,
                                   const MarketParams& m, const AgentParams& a);

// Euler-Maruyama on the wealth SDE, absorbing at the first nonpositive
// crossing. Constant policies run through the same Euler kernel here (the
// exact sampler above is the reference). Wild/fast policies dispatch to their
// dedicated engines.
PathBatch simulate_general_policy(double x, const Policy& policy, const SimConfig& cfg,
                                  const MarketParams& m, const AgentParams& a);

// E[ int_0^T e^{-delta t} U(C_t) dt ] by per-path trapezoidal quadrature. For
// constant proportional strategies with F > 0 the analytic tail over (T, inf)
// is added to the mean and reported in tail_bound; with F <= 0 and R > 1 the
// estimate is flagged divergent.
McEstimate mc_value(double x, const Policy& policy, const SimConfig& cfg,
                    const MarketParams& m, const AgentParams& a);

// E[ e^{-delta t} X_t^{1-R} / (1-R) ] at each requested time (e^{-delta t}
// E[log X_t] for log utility). Constant policies jump the Brownian motion
// between probe times; general rules are sampled on the cfg grid.
std::vector<McEstimate> transversality_probe(double x, const Policy& policy,
                                             std::span<const double> times,
                                             const SimConfig& cfg,
                                             const MarketParams& m, const AgentParams& a);

// E[N_t] for N_t = int_0^t sigma Pi_s X_s e^{-delta s} V_x(X_s) dW_s
// (= eta^{-R} sigma Pi X^{1-R} e^{-delta s} integrand for CRRA). A
// supermartingale needs E[N_t] <= 0.
std::vector<McEstimate> supermartingale_probe(double x, const Policy& policy,
                                              std::span<const double> times,
                                              const SimConfig& cfg,
                                              const MarketParams& m, const AgentParams& a);

struct HittingStats {
    std::int64_t n_paths = 0;
    double threshold = 0.0;        // hitting deadline used for fraction_hit
    double fraction_hit = 0.0;     // share of paths whose integral reached 1 by then
    McEstimate n_probe;            // N at the hitting time, over paths that hit: ~1,
                                   // against the supermartingale bound E <= 0
    double min_wealth = 0.0;       // over all paths and substeps
    double max_abs_investment = 0.0;
    std::vector<double> tau;       // per path, NaN if the integral never reached 1
};

struct CounterexampleResult {
    PathBatch batch; // first `record_paths` paths on the reporting grid
    HittingStats stats;
};

// Wild investment: Pi_t = X^{R-1}/(1-t) until the auxiliary integral
// int eta^{-R} sigma e^{-delta s}/(1-s) dW hits 1, which happens before t = 1.
// The wealth is the CEV diffusion dX = X^R sigma/(1-t) dW, simulated in log
// space. Substeps halve each time 1/(1-t) doubles; the march stops at
// t = 1 - 1e-6.
CounterexampleResult counterexample_wild(double x, const SimConfig& cfg,
                                         const MarketParams& m, const AgentParams& a,
                                         std::int64_t record_paths = 16);

// Too-fast consumption with Pi_t = 1_{t <= tau}: wealth follows the exact
// solution X_t = x (1 - t^tau)^{1/(R-1)} exp(sigma W - sigma^2 t / 2); the
// stopped integral and substep schedule are as in the wild case.
CounterexampleResult counterexample_fast_consumption(double x, const SimConfig& cfg,
                                                     const MarketParams& m, const AgentParams& a,
                                                     std::int64_t record_paths = 16);

// J(C_hat + eps G) where G is the optimal consumption stream grown from unit
// wealth on the same Brownian path; equals V(x + eps) in expectation.
McEstimate mc_perturbed_value(double x, double eps, const SimConfig& cfg,
                              const MarketParams& m, const AgentParams& a);

// max over paths and grid points of |X^{x} + eps Y - X^{x+eps}| / X^{x+eps}
// under the optimal strategy on shared Brownian paths. An algebraic identity;
// only rounding shows up.
double perturbation_identity_gap(double x, double eps, const SimConfig& cfg,
                                 const MarketParams& m, const AgentParams& a);

// Worker count used by the engines: MERTON_THREADS when set, otherwise
// hardware concurrency.
int worker_count();

// Deterministic parallel map: body(path_index) over [0, n), chunked.
void parallel_for_paths(std::int64_t n, const std::function<void(std::int64_t)>& body);

// Mean / stderr / CI over per-path values; antithetic batches are reduced
// pairwise first. Values are consumed in index order.
McEstimate summarize(std::span<const double> per_path, bool antithetic);

} // namespace merton
