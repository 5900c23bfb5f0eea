// Test-only oracles, independent of the library code paths they check:
// long-double re-evaluations of the closed forms, dense grid search for the
// operator maximizers, and a least-squares slope fit.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oracle {

struct Params {
    long double r, mu, sigma, R, delta;
};

inline long double lambda_ld(const Params& p) { return (p.mu - p.r) / p.sigma; }

inline long double eta_ld(const Params& p) {
    const long double lam = lambda_ld(p);
    return (p.delta - (1.0L - p.R) * (p.r + lam * lam / (2.0L * p.R))) / p.R;
}

inline long double pow_ld(long double x, long double e) { return std::exp(e * std::log(x)); }

inline long double F_ld(const Params& p, long double pi, long double xi) {
    const long double lam = lambda_ld(p);
    return p.delta
         - (1.0L - p.R) * (p.r + lam * p.sigma * pi - pi * pi * p.sigma * p.sigma * p.R / 2.0L - xi);
}

inline long double constant_value_ld(const Params& p, long double pi, long double xi, long double x) {
    return pow_ld(x, 1.0L - p.R) / (1.0L - p.R) * pow_ld(xi, 1.0L - p.R) / F_ld(p, pi, xi);
}

inline long double crra_value_ld(const Params& p, long double x) {
    const long double e = eta_ld(p);
    return pow_ld(e, -p.R) * pow_ld(x, 1.0L - p.R) / (1.0L - p.R);
}

inline long double log_value_ld(const Params& p, long double x) {
    const long double lam = lambda_ld(p);
    return (p.delta * std::log(p.delta * x) + p.r + lam * lam / 2.0L - p.delta)
         / (p.delta * p.delta);
}

inline long double impatience_ld(const Params& p) { return p.delta + p.r * (p.R - 1.0L); }

// Characteristic quadratic of the bankruptcy solution, for residual checks.
inline long double klss_poly_ld(const Params& p, long double z) {
    const long double lam = lambda_ld(p);
    return lam * lam / 2.0L * z * z + (p.r - p.delta - lam * lam / 2.0L) * p.R * z
         - p.r * p.R * p.R;
}

struct GridMax {
    double pi = 0.0;
    double c = 0.0;
    double value = 0.0;
    double pi_step = 0.0;
    double c_step = 0.0;
};

// Dense grid search over (pi, c); the independent check of the analytic
// maximizers. c starts at a positive floor because c = 0 can sit at -inf.
template <typename F2>
GridMax grid_search(F2&& f, double pi_lo, double pi_hi, double c_lo, double c_hi,
                    int n = 401) {
    GridMax best;
    best.value = -1e300;
    best.pi_step = (pi_hi - pi_lo) / (n - 1);
    best.c_step = (c_hi - c_lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double pi = pi_lo + best.pi_step * i;
        for (int j = 0; j < n; ++j) {
            const double c = c_lo + best.c_step * j;
            const double v = f(pi, c);
            if (v > best.value) {
                best.value = v;
                best.pi = pi;
                best.c = c;
            }
        }
    }
    return best;
}

// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Small deterministic generator for randomized test tuples (not the library's
// counter RNG; tests should not share the machinery they probe).
struct TestRng {
    std::uint64_t state;
    explicit TestRng(std::uint64_t seed) : state(seed ^ 0x9E3779B97F4A7C15ull) {}
    double next() { // xorshift64*, mapped to (0,1)
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        const std::uint64_t z = state * 0x2545F4914F6CDD1Dull;
        return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }
};

} // namespace oracle
