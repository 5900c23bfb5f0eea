// Market and agent parameters for the constant-coefficient investment-consumption
// problem: validation, well-posedness classification, and accounting-unit changes.
#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace merton {

// Black-Scholes-Merton market: riskless rate r, risky drift mu, volatility sigma > 0.
// Immutable after construction; all fields finite.
struct MarketParams {
    double r;
    double mu;
    double sigma;

    MarketParams(double r, double mu, double sigma);

    double sharpe() const { return (mu - r) / sigma; }
};

// CRRA preferences: relative risk aversion R > 0 (R == 1 is log utility, matched
// exactly, never by proximity) and discount rate delta (any sign).
struct AgentParams {
    double R;
    double delta;

    AgentParams(double R, double delta);

    bool log_utility() const { return R == 1.0; }
};

enum class Posedness {
    WellPosed,
    IllPosedPlusInfinity,
    IllPosedMinusInfinity,
};

// Outcome of the well-posedness trichotomy. `rate` is the optimal consumption
// fraction when well-posed (eta for R != 1, delta for log utility). `margin` is
// the distance of the deciding quantity from zero, so callers can flag
// numerically marginal classifications; the classification itself uses the
// exact sign, with no epsilon band.
struct WellPosedness {
    Posedness tag;
    double rate;
    double margin;

    bool well_posed() const { return tag == Posedness::WellPosed; }
};

const char* to_string(Posedness tag);

// Thrown when a closed-form object is requested for an ill-posed problem.
class IllPosedError : public std::domain_error {
public:
    IllPosedError(const WellPosedness& cls, const std::string& what);
    const WellPosedness& classification() const { return cls_; }

private:
    WellPosedness cls_;
};

double sharpe_ratio(const MarketParams& m);

// eta = (1/R) * [delta - (1-R)(r + lambda^2/(2R))]. Rejects R == 1; the log
// case is governed by delta and kappa instead.
double eta(const MarketParams& m, const AgentParams& a);

// Total classification: R != 1 by the sign of eta, R == 1 by delta and
// kappa = r + lambda^2/2.
WellPosedness classify(const MarketParams& m, const AgentParams& a);

// Deterministic change of accounting units D_t = exp(gamma t):
// (r, mu, sigma, delta) -> (r+gamma, mu+gamma, sigma, delta - (R-1)gamma).
std::pair<MarketParams, AgentParams>
numeraire_shift(const MarketParams& m, const AgentParams& a, double gamma);

// phi = delta + r(R-1), the discounting parameter that does not depend on the
// accounting units. Satisfies eta = phi/R + ((R-1)/R) * lambda^2/(2R).
double impatience_rate(const MarketParams& m, const AgentParams& a);

} // namespace merton
