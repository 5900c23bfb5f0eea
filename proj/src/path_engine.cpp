#include "merton/path_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "merton/hjb.hpp"
#include "merton/rng.hpp"

namespace merton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Substep floor for the t -> 1 singularity of the counterexample strategies.
constexpr double kTimeCeiling = 1.0 - 1e-6;
constexpr double kHitDeadline = 1.0 - 1e-3;

void require_pos(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be a positive finite real");
    }
}

struct PathRng {
    std::uint64_t seed;
    bool antithetic;

    double z(std::int64_t path, std::uint64_t step) const {
        if (antithetic) {
            const double g = normal_draw(seed, static_cast<std::uint64_t>(path / 2), step);
            return (path % 2 == 0) ? g : -g;
        }
        return normal_draw(seed, static_cast<std::uint64_t>(path), step);
    }
};

double drift_rate(double pi, double xi, const MarketParams& m) {
    return m.r + pi * (m.mu - m.r) - xi - pi * pi * m.sigma * m.sigma / 2.0;
}

} // namespace

void SimConfig::validate() const {
    require_pos(dt, "dt");
    require_pos(horizon, "horizon");
    if (n_paths < 1) {
        throw std::invalid_argument("n_paths must be >= 1");
    }
    const double steps = horizon / dt;
    const auto n = static_cast<std::int64_t>(std::llround(steps));
    if (n < 1 || std::fabs(static_cast<double>(n) * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
        throw std::invalid_argument("horizon must be a whole number of dt steps");
    }
    if (antithetic && n_paths % 2 != 0) {
        throw std::invalid_argument("antithetic sampling needs an even n_paths");
    }
}

std::int64_t SimConfig::n_steps() const {
    return static_cast<std::int64_t>(std::llround(horizon / dt));
}

int worker_count() {
    if (const char* env = std::getenv("MERTON_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) {
            return static_cast<int>(std::min<long>(v, 256));
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for_paths(std::int64_t n, const std::function<void(std::int64_t)>& body) {
    const int workers = static_cast<int>(std::min<std::int64_t>(worker_count(), std::max<std::int64_t>(n, 1)));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::int64_t first_error_path = n;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = static_cast<std::int64_t>(w) * chunk;
        const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([&, lo, hi] {
            for (std::int64_t i = lo; i < hi; ++i) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> g(err_mutex);
                    if (i < first_error_path) {
                        first_error_path = i;
                        first_error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

McEstimate summarize(std::span<const double> per_path, bool antithetic) {
    std::vector<double> units;
    if (antithetic) {
        units.reserve(per_path.size() / 2);
        for (std::size_t j = 0; j + 1 < per_path.size(); j += 2) {
            units.push_back(0.5 * (per_path[j] + per_path[j + 1]));
        }
    } else {
        units.assign(per_path.begin(), per_path.end());
    }
    const auto n = static_cast<std::int64_t>(units.size());
    McEstimate e;
    e.n_effective = n;
    double sum = 0.0;
    for (double v : units) {
        sum += v;
    }
    e.mean = sum / static_cast<double>(n);
    if (n >= 2 && std::isfinite(e.mean)) {
        double ss = 0.0;
        for (double v : units) {
            const double d = v - e.mean;
            ss += d * d;
        }
        e.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    } else {
        e.std_error = kNaN;
    }
    e.ci95_lo = e.mean - 1.96 * e.std_error;
    e.ci95_hi = e.mean + 1.96 * e.std_error;
    return e;
}

// ---------------------------------------------------------------------------
// Exact sampling of constant proportional strategies
// ---------------------------------------------------------------------------

PathBatch simulate_constant_policy(double x, double pi, double xi, const SimConfig& cfg,
                                   const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    if (!(xi >= 0.0) || !std::isfinite(xi) || !std::isfinite(pi)) {
        throw std::invalid_argument("pi must be finite and xi >= 0");
    }
    const std::int64_t steps = cfg.n_steps();
    const std::size_t width = static_cast<std::size_t>(steps) + 1;
    PathBatch batch;
    batch.n_paths = cfg.n_paths;
    batch.x0 = x;
    batch.antithetic = cfg.antithetic;
    batch.times.resize(width);
    for (std::size_t k = 0; k < width; ++k) {
        batch.times[k] = static_cast<double>(k) * cfg.dt;
    }
    batch.W.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.X.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.C.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.absorbed_at.assign(static_cast<std::size_t>(cfg.n_paths), kNaN);

    PathBatch::ConstantPolicyInfo info;
    info.pi = pi;
    info.xi = xi;
    const WellPosedness cls = classify(m, a);
    if (cls.well_posed()) {
        const ClosedFormSolution sol = merton_solution(m, a);
        info.optimal = std::fabs(pi - sol.pi_hat) <= 1e-12 * std::max(1.0, std::fabs(sol.pi_hat))
                    && std::fabs(xi - sol.xi_hat) <= 1e-12 * std::max(1.0, std::fabs(sol.xi_hat));
    }
    batch.constant_policy = info;

    const PathRng rng{cfg.seed, cfg.antithetic};
    const double b = drift_rate(pi, xi, m);
    const double sdt = std::sqrt(cfg.dt);
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        double w = 0.0;
        batch.W[row] = 0.0;
        batch.X[row] = x;
        batch.C[row] = xi * x;
        for (std::int64_t k = 1; k <= steps; ++k) {
            w += sdt * rng.z(p, static_cast<std::uint64_t>(k - 1));
            const double t = static_cast<double>(k) * cfg.dt;
            const double wealth = x * std::exp(pi * m.sigma * w + b * t);
            batch.W[row + static_cast<std::size_t>(k)] = w;
            batch.X[row + static_cast<std::size_t>(k)] = wealth;
            batch.C[row + static_cast<std::size_t>(k)] = xi * wealth;
        }
    });
    return batch;
}

// ---------------------------------------------------------------------------
// Euler-Maruyama for general rules
// ---------------------------------------------------------------------------

namespace {

// One Euler path into caller-provided rows; returns the absorption time or NaN.
template <typename Decide>
double euler_path(double x, const SimConfig& cfg, const MarketParams& m,
                  const PathRng& rng, std::int64_t p, std::span<const double> times,
                  std::span<double> W, std::span<double> X, std::span<double> C,
                  Decide&& decide) {
    const std::int64_t steps = cfg.n_steps();
    const double sdt = std::sqrt(cfg.dt);
    double absorbed_at = kNaN;
    bool absorbed = false;
    W[0] = 0.0;
    X[0] = x;
    for (std::int64_t k = 0; k <= steps; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        double pi_k = 0.0;
        double c_k = 0.0;
        if (!absorbed) {
            const auto [pi_v, c_v] = decide(times[ku], X[ku], k, W, X);
            if (!std::isfinite(pi_v) || !std::isfinite(c_v) || c_v < 0.0) {
                std::ostringstream msg;
                msg << "policy returned invalid controls (pi=" << pi_v << ", C=" << c_v
                    << ") on path " << p << " at t=" << times[ku];
                throw std::invalid_argument(msg.str());
            }
            pi_k = pi_v;
            c_k = c_v;
        }
        C[ku] = absorbed ? 0.0 : c_k;
        if (k == steps) {
            break;
        }
        const double dW = sdt * rng.z(p, static_cast<std::uint64_t>(k));
        W[ku + 1] = W[ku] + dW;
        if (absorbed) {
            X[ku + 1] = 0.0;
            continue;
        }
        const double xk = X[ku];
        const double xn = xk + (xk * (m.r + pi_k * (m.mu - m.r)) - c_k) * cfg.dt
                        + xk * pi_k * m.sigma * dW;
        if (xn <= 0.0) {
            X[ku + 1] = 0.0;
            absorbed = true;
            absorbed_at = times[ku + 1];
        } else {
            X[ku + 1] = xn;
        }
    }
    return absorbed_at;
}

CounterexampleResult run_counterexample(bool wild, double x, const SimConfig& cfg,
                                        const MarketParams& m, const AgentParams& a,
                                        std::int64_t record_paths,
                                        std::span<const double> probe_times,
                                        std::vector<std::vector<double>>* probe_values);

} // namespace

PathBatch simulate_general_policy(double x, const Policy& policy, const SimConfig& cfg,
                                  const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    if (std::holds_alternative<PolicyWildInvestment>(policy)) {
        return counterexample_wild(x, cfg, m, a, cfg.n_paths).batch;
    }
    if (std::holds_alternative<PolicyFastConsumption>(policy)) {
        return counterexample_fast_consumption(x, cfg, m, a, cfg.n_paths).batch;
    }

    const std::int64_t steps = cfg.n_steps();
    const std::size_t width = static_cast<std::size_t>(steps) + 1;
    PathBatch batch;
    batch.n_paths = cfg.n_paths;
    batch.x0 = x;
    batch.antithetic = cfg.antithetic;
    batch.times.resize(width);
    for (std::size_t k = 0; k < width; ++k) {
        batch.times[k] = static_cast<double>(k) * cfg.dt;
    }
    batch.W.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.X.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.C.assign(static_cast<std::size_t>(cfg.n_paths) * width, 0.0);
    batch.absorbed_at.assign(static_cast<std::size_t>(cfg.n_paths), kNaN);

    const PathRng rng{cfg.seed, cfg.antithetic};
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        std::span<double> Wrow(batch.W.data() + row, width);
        std::span<double> Xrow(batch.X.data() + row, width);
        std::span<double> Crow(batch.C.data() + row, width);
        if (const auto* pc = std::get_if<PolicyConstant>(&policy)) {
            batch.absorbed_at[static_cast<std::size_t>(p)] = euler_path(
                x, cfg, m, rng, p, batch.times, Wrow, Xrow, Crow,
                [pc](double, double wealth, std::int64_t, std::span<const double>,
                     std::span<const double>) {
                    return std::pair<double, double>(pc->pi, pc->xi * wealth);
                });
        } else {
            const auto& rule = std::get<PolicyRule>(policy).rule;
            batch.absorbed_at[static_cast<std::size_t>(p)] = euler_path(
                x, cfg, m, rng, p, batch.times, Wrow, Xrow, Crow,
                [&](double t, double wealth, std::int64_t k, std::span<const double> Wh,
                    std::span<const double> Xh) {
                    PathHistory h{std::span<const double>(batch.times.data(),
                                                          static_cast<std::size_t>(k) + 1),
                                  Wh.subspan(0, static_cast<std::size_t>(k) + 1),
                                  Xh.subspan(0, static_cast<std::size_t>(k) + 1), k};
                    return rule(t, wealth, h);
                });
        }
    });
    return batch;
}

// ---------------------------------------------------------------------------
// Monte Carlo value
// ---------------------------------------------------------------------------

namespace {

// Trapezoid of e^{-delta t} U(C_t) over the grid.
double discounted_utility_integral(std::span<const double> times, std::span<const double> C,
                                   const AgentParams& a) {
    double acc = 0.0;
    double prev = std::exp(-a.delta * times[0]) * utility(C[0], a);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double cur = std::exp(-a.delta * times[k]) * utility(C[k], a);
        acc += 0.5 * (prev + cur) * (times[k] - times[k - 1]);
        prev = cur;
    }
    return acc;
}

struct TailInfo {
    double tail = 0.0;
    bool has_tail = false;
    bool divergent = false;
    bool warn = false;
};

TailInfo constant_policy_tail(double x, double pi, double xi, double T,
                              const MarketParams& m, const AgentParams& a) {
    TailInfo info;
    if (a.log_utility()) {
        if (!(a.delta > 0.0)) {
            info.divergent = true;
            info.warn = true;
            return info;
        }
        if (xi > 0.0) {
            const double b = drift_rate(pi, xi, m); // growth rate of E[log X_t]
            const double head = std::log(xi * x) + b * T;
            info.tail = std::exp(-a.delta * T) * (head / a.delta + b / (a.delta * a.delta));
            info.has_tail = true;
            info.warn = a.delta * T < 5.0;
        }
        return info;
    }
    const double f = F(pi, xi, m, a);
    if (f <= 0.0) {
        info.divergent = true;
        info.warn = true;
        return info;
    }
    if (xi > 0.0) {
        info.tail = pow_pos(x, 1.0 - a.R) * pow_pos(xi, 1.0 - a.R)
                  * std::exp(-f * T) / ((1.0 - a.R) * f);
        info.has_tail = true;
        info.warn = f * T < 5.0;
    }
    return info;
}

} // namespace

McEstimate mc_value(double x, const Policy& policy, const SimConfig& cfg,
                    const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");

    if (std::holds_alternative<PolicyWildInvestment>(policy)
        || std::holds_alternative<PolicyFastConsumption>(policy)) {
        // No analytic tail exists for these; integrate the recorded grid only.
        const PathBatch batch = simulate_general_policy(x, policy, cfg, m, a);
        std::vector<double> vals(static_cast<std::size_t>(batch.n_paths));
        parallel_for_paths(batch.n_paths, [&](std::int64_t p) {
            const std::size_t row = static_cast<std::size_t>(p) * batch.times.size();
            vals[static_cast<std::size_t>(p)] = discounted_utility_integral(
                batch.times, std::span<const double>(batch.C.data() + row, batch.times.size()), a);
        });
        McEstimate e = summarize(vals, cfg.antithetic);
        e.horizon_warning = true;
        return e;
    }

    const std::int64_t steps = cfg.n_steps();
    std::vector<double> vals(static_cast<std::size_t>(cfg.n_paths));
    const PathRng rng{cfg.seed, cfg.antithetic};

    if (const auto* pc = std::get_if<PolicyConstant>(&policy)) {
        // Exact sampling, streamed: U(xi X_t) = U(xi x) e^{(1-R) g_t} with
        // g_t = pi sigma W_t + b t (for log utility, log(xi x) + g_t).
        const double b = drift_rate(pc->pi, pc->xi, m);
        const double u0 = utility(pc->xi * x, a);
        const double sdt = std::sqrt(cfg.dt);
        if (u0 == -kInf) {
            McEstimate e;
            e.mean = -kInf;
            e.std_error = kNaN;
            e.ci95_lo = e.ci95_hi = kNaN;
            e.n_effective = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
            e.divergent = true;
            return e;
        }
        const double vol = pc->pi * m.sigma;
        parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
            double w = 0.0;
            double acc = 0.0;
            double prev = u0; // t = 0 integrand
            for (std::int64_t k = 1; k <= steps; ++k) {
                w += sdt * rng.z(p, static_cast<std::uint64_t>(k - 1));
                const double t = static_cast<double>(k) * cfg.dt;
                const double g = vol * w + b * t;
                // e^{-delta t} U(C_t) in one exponential
                const double cur = a.log_utility()
                                       ? std::exp(-a.delta * t) * (u0 + g)
                                       : u0 * std::exp((1.0 - a.R) * g - a.delta * t);
                acc += 0.5 * (prev + cur) * cfg.dt;
                prev = cur;
            }
            vals[static_cast<std::size_t>(p)] = acc;
        });
        const TailInfo tail = constant_policy_tail(x, pc->pi, pc->xi, cfg.horizon, m, a);
        McEstimate e = summarize(vals, cfg.antithetic);
        if (tail.has_tail) {
            e.mean += tail.tail;
            e.ci95_lo += tail.tail;
            e.ci95_hi += tail.tail;
            e.tail_bound = std::fabs(tail.tail);
        }
        e.divergent = tail.divergent;
        e.horizon_warning = tail.warn;
        return e;
    }

    const auto& rule = std::get<PolicyRule>(policy).rule;
    const std::size_t width = static_cast<std::size_t>(steps) + 1;
    std::vector<double> times(width);
    for (std::size_t k = 0; k < width; ++k) {
        times[k] = static_cast<double>(k) * cfg.dt;
    }
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        thread_local std::vector<double> W, X, C;
        W.resize(width);
        X.resize(width);
        C.resize(width);
        euler_path(x, cfg, m, rng, p, times, W, X, C,
                   [&](double t, double wealth, std::int64_t k, std::span<const double> Wh,
                       std::span<const double> Xh) {
                       PathHistory h{std::span<const double>(times.data(),
                                                             static_cast<std::size_t>(k) + 1),
                                     Wh.subspan(0, static_cast<std::size_t>(k) + 1),
                                     Xh.subspan(0, static_cast<std::size_t>(k) + 1), k};
                       return rule(t, wealth, h);
                   });
        vals[static_cast<std::size_t>(p)] = discounted_utility_integral(times, C, a);
    });
    McEstimate e = summarize(vals, cfg.antithetic);
    e.horizon_warning = true; // no analytic tail for a general rule
    return e;
}

// ---------------------------------------------------------------------------
// Condition probes
// ---------------------------------------------------------------------------

namespace {

void check_probe_times(std::span<const double> times) {
    if (times.empty()) {
        throw std::invalid_argument("probe times must be nonempty");
    }
    double prev = 0.0;
    for (double t : times) {
        if (!(t > prev)) {
            throw std::invalid_argument("probe times must be positive and strictly increasing");
        }
        prev = t;
    }
}

double wealth_utility(double wealth, const AgentParams& a) {
    if (a.log_utility()) {
        return std::log(wealth);
    }
    return pow_pos(wealth, 1.0 - a.R) / (1.0 - a.R);
}

std::vector<std::int64_t> grid_indices(std::span<const double> times, const SimConfig& cfg) {
    std::vector<std::int64_t> idx;
    idx.reserve(times.size());
    for (double t : times) {
        const auto k = static_cast<std::int64_t>(std::llround(t / cfg.dt));
        if (k < 1 || k > cfg.n_steps()
            || std::fabs(static_cast<double>(k) * cfg.dt - t) > 1e-9 * std::max(1.0, t)) {
            std::ostringstream msg;
            msg << "probe time " << t << " is not on the simulation grid";
            throw std::invalid_argument(msg.str());
        }
        idx.push_back(k);
    }
    return idx;
}

std::vector<McEstimate> summarize_columns(const std::vector<double>& vals,
                                          std::size_t n_times, std::int64_t n_paths,
                                          bool antithetic) {
    std::vector<McEstimate> out;
    out.reserve(n_times);
    std::vector<double> col(static_cast<std::size_t>(n_paths));
    for (std::size_t j = 0; j < n_times; ++j) {
        for (std::int64_t p = 0; p < n_paths; ++p) {
            col[static_cast<std::size_t>(p)] = vals[static_cast<std::size_t>(p) * n_times + j];
        }
        out.push_back(summarize(col, antithetic));
    }
    return out;
}

} // namespace

std::vector<McEstimate> transversality_probe(double x, const Policy& policy,
                                             std::span<const double> times,
                                             const SimConfig& cfg,
                                             const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    check_probe_times(times);
    const std::size_t n_times = times.size();
    std::vector<double> vals(static_cast<std::size_t>(cfg.n_paths) * n_times);
    const PathRng rng{cfg.seed, cfg.antithetic};

    if (const auto* pc = std::get_if<PolicyConstant>(&policy)) {
        // X_t depends on W_t only: jump the Brownian motion between probes.
        const double b = drift_rate(pc->pi, pc->xi, m);
        parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
            double w = 0.0;
            double prev_t = 0.0;
            for (std::size_t j = 0; j < n_times; ++j) {
                const double t = times[j];
                w += std::sqrt(t - prev_t) * rng.z(p, j);
                prev_t = t;
                const double wealth = x * std::exp(pc->pi * m.sigma * w + b * t);
                vals[static_cast<std::size_t>(p) * n_times + j] =
                    std::exp(-a.delta * t) * wealth_utility(wealth, a);
            }
        });
        return summarize_columns(vals, n_times, cfg.n_paths, cfg.antithetic);
    }
    if (!std::holds_alternative<PolicyRule>(policy)) {
        throw std::invalid_argument("transversality_probe supports constant and rule policies");
    }
    const auto idx = grid_indices(times, cfg);
    const PathBatch batch = simulate_general_policy(x, policy, cfg, m, a);
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        for (std::size_t j = 0; j < n_times; ++j) {
            const double wealth = batch.at(batch.X, p, idx[j]);
            const double t = times[j];
            // Absorbed wealth contributes U(0): 0 for R < 1, -inf for R >= 1.
            const double wu = wealth > 0.0 ? wealth_utility(wealth, a)
                                           : (a.R < 1.0 ? 0.0 : -kInf);
            vals[static_cast<std::size_t>(p) * n_times + j] = std::exp(-a.delta * t) * wu;
        }
    });
    return summarize_columns(vals, n_times, cfg.n_paths, cfg.antithetic);
}

std::vector<McEstimate> supermartingale_probe(double x, const Policy& policy,
                                              std::span<const double> times,
                                              const SimConfig& cfg,
                                              const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    check_probe_times(times);
    const std::size_t n_times = times.size();

    if (std::holds_alternative<PolicyWildInvestment>(policy)
        || std::holds_alternative<PolicyFastConsumption>(policy)) {
        const bool wild = std::holds_alternative<PolicyWildInvestment>(policy);
        std::vector<std::vector<double>> probe_vals;
        run_counterexample(wild, x, cfg, m, a, 0, times, &probe_vals);
        std::vector<McEstimate> out;
        out.reserve(n_times);
        for (auto& col : probe_vals) {
            out.push_back(summarize(col, cfg.antithetic));
        }
        return out;
    }

    const ClosedFormSolution sol = merton_solution(m, a); // needs a well-posed problem
    const auto idx = grid_indices(times, cfg);
    const std::int64_t steps = cfg.n_steps();
    std::vector<double> vals(static_cast<std::size_t>(cfg.n_paths) * n_times);
    const PathRng rng{cfg.seed, cfg.antithetic};
    const double sdt = std::sqrt(cfg.dt);

    const auto accumulate = [&](std::int64_t p, auto&& state_at, auto&& pi_at) {
        // state_at(k) -> wealth at grid point k; pi_at(k, wealth) -> investment.
        double n_acc = 0.0;
        std::size_t j = 0;
        double w = 0.0;
        for (std::int64_t k = 0; k < steps && j < n_times; ++k) {
            const double t = static_cast<double>(k) * cfg.dt;
            const double wealth = state_at(k, w);
            const double dW = sdt * rng.z(p, static_cast<std::uint64_t>(k));
            if (wealth > 0.0) {
                n_acc += m.sigma * pi_at(k, wealth) * wealth * std::exp(-a.delta * t)
                       * sol.value_dx(wealth) * dW;
            }
            w += dW;
            while (j < n_times && idx[static_cast<std::size_t>(j)] == k + 1) {
                vals[static_cast<std::size_t>(p) * n_times + j] = n_acc;
                ++j;
            }
        }
    };

    if (const auto* pc = std::get_if<PolicyConstant>(&policy)) {
        const double b = drift_rate(pc->pi, pc->xi, m);
        parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
            accumulate(
                p,
                [&](std::int64_t k, double w) {
                    const double t = static_cast<double>(k) * cfg.dt;
                    return x * std::exp(pc->pi * m.sigma * w + b * t);
                },
                [&](std::int64_t, double) { return pc->pi; });
        });
        return summarize_columns(vals, n_times, cfg.n_paths, cfg.antithetic);
    }
    if (!std::holds_alternative<PolicyRule>(policy)) {
        throw std::invalid_argument("supermartingale_probe supports constant and rule policies");
    }
    const auto& rule = std::get<PolicyRule>(policy).rule;
    const std::size_t width = static_cast<std::size_t>(steps) + 1;
    std::vector<double> grid(width);
    for (std::size_t k = 0; k < width; ++k) {
        grid[k] = static_cast<double>(k) * cfg.dt;
    }
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        thread_local std::vector<double> W, X, C;
        W.resize(width);
        X.resize(width);
        C.resize(width);
        euler_path(x, cfg, m, rng, p, grid, W, X, C,
                   [&](double t, double wealth, std::int64_t k, std::span<const double> Wh,
                       std::span<const double> Xh) {
                       PathHistory h{std::span<const double>(grid.data(),
                                                             static_cast<std::size_t>(k) + 1),
                                     Wh.subspan(0, static_cast<std::size_t>(k) + 1),
                                     Xh.subspan(0, static_cast<std::size_t>(k) + 1), k};
                       return rule(t, wealth, h);
                   });
        accumulate(
            p, [&](std::int64_t k, double) { return X[static_cast<std::size_t>(k)]; },
            [&](std::int64_t k, double wealth) {
                PathHistory h{std::span<const double>(grid.data(),
                                                      static_cast<std::size_t>(k) + 1),
                              std::span<const double>(W.data(), static_cast<std::size_t>(k) + 1),
                              std::span<const double>(X.data(), static_cast<std::size_t>(k) + 1),
                              k};
                return rule(static_cast<double>(k) * cfg.dt, wealth, h).first;
            });
    });
    return summarize_columns(vals, n_times, cfg.n_paths, cfg.antithetic);
}

// ---------------------------------------------------------------------------
// Supermartingale counterexamples
// ---------------------------------------------------------------------------

namespace {

struct CexPathOut {
    double tau = kNaN;
    double n_at_deadline = 0.0; // A at tau ^ deadline
    double min_wealth = kInf;
    double max_abs_investment = 0.0;
};

CounterexampleResult run_counterexample(bool wild, double x, const SimConfig& cfg,
                                        const MarketParams& m, const AgentParams& a,
                                        std::int64_t record_paths,
                                        std::span<const double> probe_times,
                                        std::vector<std::vector<double>>* probe_values) {
    cfg.validate();
    require_pos(x, "x");
    if (!(a.R > 1.0)) {
        throw std::invalid_argument("counterexample strategies need R > 1");
    }
    if (!(m.mu >= m.r) || !(m.r > 0.0)) {
        throw std::invalid_argument("counterexample strategies need mu >= r > 0");
    }
    const double et = eta(m, a);
    if (!(et > 0.0)) {
        throw std::invalid_argument("counterexample strategies need a well-posed problem");
    }
    for (double t : probe_times) {
        if (!(t > 0.0) || t > kTimeCeiling) {
            throw std::invalid_argument("counterexample probe times must lie in (0, 1 - 1e-6]");
        }
    }
    record_paths = std::clamp<std::int64_t>(record_paths, 0, cfg.n_paths);

    const double eta_negR = pow_pos(et, -a.R);
    const double x_pow = pow_pos(x, 1.0 - a.R);

    // Reporting grid: multiples of dt up to the hitting deadline.
    std::vector<double> report;
    for (std::int64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        if (t > kHitDeadline + 1e-15) {
            break;
        }
        report.push_back(t);
    }
    const std::size_t width = report.size();

    // Boundaries every substep must land on: report points, the deadline, the
    // probe times, and the ceiling.
    std::vector<double> boundaries(report.begin() + 1, report.end());
    boundaries.push_back(kHitDeadline);
    boundaries.insert(boundaries.end(), probe_times.begin(), probe_times.end());
    boundaries.push_back(kTimeCeiling);
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end(),
                                 [](double u, double v) { return std::fabs(u - v) < 1e-14; }),
                     boundaries.end());

    CounterexampleResult result;
    PathBatch& batch = result.batch;
    batch.n_paths = record_paths;
    batch.x0 = x;
    batch.antithetic = cfg.antithetic;
    batch.times = report;
    batch.W.assign(static_cast<std::size_t>(record_paths) * width, 0.0);
    batch.X.assign(static_cast<std::size_t>(record_paths) * width, 0.0);
    batch.C.assign(static_cast<std::size_t>(record_paths) * width, 0.0);
    batch.absorbed_at.assign(static_cast<std::size_t>(record_paths), kNaN);

    const std::size_t n_probes = probe_times.size();
    std::vector<double> probe_store(static_cast<std::size_t>(cfg.n_paths) * std::max<std::size_t>(n_probes, 1));
    std::vector<CexPathOut> outs(static_cast<std::size_t>(cfg.n_paths));
    const PathRng rng{cfg.seed, cfg.antithetic};

    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        CexPathOut out;
        double t = 0.0;
        double w = 0.0;
        double A = 0.0;
        double log_wealth = std::log(x); // wild state; fast wealth comes from the formula
        bool hit = false;
        double w_tau = 0.0;
        std::uint64_t step = 0;
        std::size_t bi = 0; // next boundary
        std::size_t ri = 1; // next report row
        std::size_t pi_idx = 0; // next probe
        const bool recorded = p < record_paths;

        const auto wealth_now = [&]() {
            if (wild) {
                return std::exp(log_wealth);
            }
            const double tt = hit ? std::min(t, out.tau) : t;
            const double ww = hit ? w_tau : w;
            return x * pow_pos(1.0 - tt, 1.0 / (a.R - 1.0))
                 * std::exp(m.sigma * ww - 0.5 * m.sigma * m.sigma * tt);
        };
        const auto consumption_now = [&](double wealth) {
            if (hit) {
                return m.r * wealth;
            }
            if (wild) {
                const double inv = std::exp((a.R - 1.0) * log_wealth) / (1.0 - t);
                return m.r * wealth + inv * wealth * (m.mu - m.r);
            }
            return wealth / ((a.R - 1.0) * (1.0 - t)) + m.r * wealth
                 + wealth * (m.mu - m.r);
        };

        if (recorded) {
            const std::size_t row = static_cast<std::size_t>(p) * width;
            batch.W[row] = 0.0;
            batch.X[row] = x;
            batch.C[row] = consumption_now(x);
        }
        out.min_wealth = x;

        while (bi < boundaries.size()) {
            // Substeps halve whenever 1/(1-t) doubles; never overstep a boundary.
            const int halvings = std::clamp(
                static_cast<int>(std::floor(std::log2(1.0 / (1.0 - t)))), 0, 40);
            double h = cfg.dt * std::ldexp(1.0, -halvings);
            bool lands = false;
            if (t + h >= boundaries[bi] - 1e-15) {
                h = boundaries[bi] - t;
                lands = true;
            }
            const double dW = std::sqrt(h) * rng.z(p, step++);
            if (!hit) {
                double integrand;
                if (wild) {
                    integrand = eta_negR * m.sigma * std::exp(-a.delta * t) / (1.0 - t);
                    const double xr1 = std::exp((a.R - 1.0) * log_wealth);
                    const double vol = xr1 * m.sigma / (1.0 - t);
                    log_wealth += vol * dW - 0.5 * vol * vol * h;
                    log_wealth = std::clamp(log_wealth, -700.0, 700.0);
                    out.max_abs_investment = std::max(out.max_abs_investment,
                                                      std::fabs(xr1 / (1.0 - t)));
                } else {
                    integrand = x_pow * eta_negR * m.sigma
                              * std::exp(m.sigma * (1.0 - a.R) * w
                                         - (a.delta + 0.5 * (1.0 - a.R) * m.sigma * m.sigma) * t)
                              / (1.0 - t);
                    out.max_abs_investment = std::max(out.max_abs_investment, 1.0);
                }
                A += integrand * dW;
            }
            w += dW;
            t = lands ? boundaries[bi] : t + h;
            if (!hit && A >= 1.0) {
                hit = true;
                out.tau = t;
                w_tau = w;
            }
            const double wealth = wealth_now();
            out.min_wealth = std::min(out.min_wealth, wealth);

            if (lands) {
                const double tb = boundaries[bi];
                if (recorded && ri < width && std::fabs(tb - report[ri]) < 1e-14) {
                    const std::size_t row = static_cast<std::size_t>(p) * width + ri;
                    batch.W[row] = w;
                    batch.X[row] = wealth;
                    batch.C[row] = consumption_now(wealth);
                    ++ri;
                }
                while (pi_idx < n_probes && std::fabs(tb - probe_times[pi_idx]) < 1e-14) {
                    probe_store[static_cast<std::size_t>(p) * n_probes + pi_idx] = A;
                    ++pi_idx;
                }
                if (std::fabs(tb - kHitDeadline) < 1e-14) {
                    out.n_at_deadline = A;
                }
                ++bi;
            }
            // Once the integral has hit 1, A and the wealth are frozen, so every
            // remaining output of this path is already determined.
            if (hit) {
                const bool rows_done = !recorded || ri >= width;
                if (rows_done) {
                    while (pi_idx < n_probes) {
                        probe_store[static_cast<std::size_t>(p) * n_probes + pi_idx++] = A;
                    }
                    break;
                }
            }
        }
        if (hit && out.tau <= kHitDeadline) {
            out.n_at_deadline = A;
        }
        outs[static_cast<std::size_t>(p)] = out;
    });

    HittingStats& stats = result.stats;
    stats.n_paths = cfg.n_paths;
    stats.threshold = kHitDeadline;
    stats.tau.resize(static_cast<std::size_t>(cfg.n_paths));
    double min_wealth = kInf;
    double max_inv = 0.0;
    // The probe estimates E[N at the hitting time]: N equals 1 there by
    // construction (grid detection overshoots upward), and since the hitting
    // time is bounded by 1, any supermartingale would need that mean <= 0.
    // The mean of N at a *fixed* time is 0 -- the stopped discrete integral is
    // a martingale -- with the mass hidden in rare, very negative never-hit
    // paths, so it carries no usable signal.
    std::vector<double> n_vals;
    n_vals.reserve(static_cast<std::size_t>(cfg.n_paths));
    for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
        const CexPathOut& o = outs[static_cast<std::size_t>(p)];
        stats.tau[static_cast<std::size_t>(p)] = o.tau;
        if (!std::isnan(o.tau) && o.tau <= kHitDeadline) {
            n_vals.push_back(o.n_at_deadline);
        }
        min_wealth = std::min(min_wealth, o.min_wealth);
        max_inv = std::max(max_inv, o.max_abs_investment);
    }
    stats.fraction_hit = static_cast<double>(n_vals.size()) / static_cast<double>(cfg.n_paths);
    stats.min_wealth = min_wealth;
    stats.max_abs_investment = max_inv;
    stats.n_probe = summarize(n_vals, false);

    if (probe_values) {
        probe_values->assign(n_probes, std::vector<double>(static_cast<std::size_t>(cfg.n_paths)));
        for (std::size_t j = 0; j < n_probes; ++j) {
            for (std::int64_t p = 0; p < cfg.n_paths; ++p) {
                (*probe_values)[j][static_cast<std::size_t>(p)] =
                    probe_store[static_cast<std::size_t>(p) * n_probes + j];
            }
        }
    }
    return result;
}

} // namespace

CounterexampleResult counterexample_wild(double x, const SimConfig& cfg,
                                         const MarketParams& m, const AgentParams& a,
                                         std::int64_t record_paths) {
    return run_counterexample(true, x, cfg, m, a, record_paths, {}, nullptr);
}

CounterexampleResult counterexample_fast_consumption(double x, const SimConfig& cfg,
                                                     const MarketParams& m, const AgentParams& a,
                                                     std::int64_t record_paths) {
    return run_counterexample(false, x, cfg, m, a, record_paths, {}, nullptr);
}

// ---------------------------------------------------------------------------
// Stochastic perturbation of the utility
// ---------------------------------------------------------------------------

McEstimate mc_perturbed_value(double x, double eps, const SimConfig& cfg,
                              const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    require_pos(eps, "eps");
    const ClosedFormSolution sol = merton_solution(m, a);
    const std::int64_t steps = cfg.n_steps();
    const double b = drift_rate(sol.pi_hat, sol.xi_hat, m);
    const double sdt = std::sqrt(cfg.dt);
    const PathRng rng{cfg.seed, cfg.antithetic};
    std::vector<double> vals(static_cast<std::size_t>(cfg.n_paths));
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        double w = 0.0;
        double acc = 0.0;
        double prev = utility(sol.xi_hat * x + eps * sol.xi_hat * 1.0, a);
        for (std::int64_t k = 1; k <= steps; ++k) {
            w += sdt * rng.z(p, static_cast<std::uint64_t>(k - 1));
            const double t = static_cast<double>(k) * cfg.dt;
            const double growth = std::exp(sol.pi_hat * m.sigma * w + b * t);
            const double wealth = x * growth;  // X^{x, pi_hat, eta X}
            const double unit = growth;        // Y = X^{1, pi_hat, eta X}, same Brownian path
            const double cur = std::exp(-a.delta * t)
                             * utility(sol.xi_hat * wealth + eps * sol.xi_hat * unit, a);
            acc += 0.5 * (prev + cur) * cfg.dt;
            prev = cur;
        }
        vals[static_cast<std::size_t>(p)] = acc;
    });
    McEstimate e = summarize(vals, cfg.antithetic);
    const TailInfo tail = constant_policy_tail(x + eps, sol.pi_hat, sol.xi_hat, cfg.horizon, m, a);
    if (tail.has_tail) {
        e.mean += tail.tail;
        e.ci95_lo += tail.tail;
        e.ci95_hi += tail.tail;
        e.tail_bound = std::fabs(tail.tail);
    }
    e.divergent = tail.divergent;
    e.horizon_warning = tail.warn;
    return e;
}

double perturbation_identity_gap(double x, double eps, const SimConfig& cfg,
                                 const MarketParams& m, const AgentParams& a) {
    cfg.validate();
    require_pos(x, "x");
    require_pos(eps, "eps");
    const ClosedFormSolution sol = merton_solution(m, a);
    const std::int64_t steps = cfg.n_steps();
    const double b = drift_rate(sol.pi_hat, sol.xi_hat, m);
    const double drift_step = (m.r + sol.pi_hat * (m.mu - m.r) - sol.xi_hat) * cfg.dt;
    const double sdt = std::sqrt(cfg.dt);
    const PathRng rng{cfg.seed, cfg.antithetic};
    std::vector<double> gaps(static_cast<std::size_t>(cfg.n_paths), 0.0);
    parallel_for_paths(cfg.n_paths, [&](std::int64_t p) {
        double worst = 0.0;
        // Exact scheme: the three processes share the Brownian path.
        double w = 0.0;
        for (std::int64_t k = 1; k <= steps; ++k) {
            w += sdt * rng.z(p, static_cast<std::uint64_t>(k - 1));
            const double t = static_cast<double>(k) * cfg.dt;
            const double growth = std::exp(sol.pi_hat * m.sigma * w + b * t);
            const double lhs = x * growth + eps * growth;
            const double rhs = (x + eps) * growth;
            worst = std::max(worst, std::fabs(lhs - rhs) / rhs);
        }
        // Euler scheme: the identity is a statement about the wealth dynamics,
        // not about one sampling formula, so check it on the discretized SDE too.
        double xe = x, ye = 1.0, xpe = x + eps;
        for (std::int64_t k = 0; k < steps; ++k) {
            const double dW = sdt * rng.z(p, static_cast<std::uint64_t>(k));
            const double shock = sol.pi_hat * m.sigma * dW;
            xe += xe * drift_step + xe * shock;
            ye += ye * drift_step + ye * shock;
            xpe += xpe * drift_step + xpe * shock;
            if (xpe > 0.0) {
                worst = std::max(worst, std::fabs(xe + eps * ye - xpe) / xpe);
            }
        }
        gaps[static_cast<std::size_t>(p)] = worst;
    });
    double worst = 0.0;
    for (double g : gaps) {
        worst = std::max(worst, g);
    }
    return worst;
}

} // namespace merton
