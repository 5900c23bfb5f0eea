#include <doctest.h>

#include <cmath>

#include "merton/market.hpp"
#include "support.hpp"

using namespace merton;

namespace {
const MarketParams kMarket1(0.02, 0.08, 0.2);
const AgentParams kAgent1(2.0, 0.05);
const oracle::Params kP1{0.02L, 0.08L, 0.2L, 2.0L, 0.05L};
} // namespace

TEST_CASE("construction validates inputs") {
    CHECK_THROWS_AS(MarketParams(0.02, 0.08, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(0.02, 0.08, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(NAN, 0.08, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(0.02, INFINITY, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(AgentParams(0.0, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(AgentParams(-1.0, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(AgentParams(2.0, NAN), std::invalid_argument);
    CHECK(AgentParams(1.0, 0.05).log_utility());
    CHECK_FALSE(AgentParams(1.0 + 1e-12, 0.05).log_utility());
}

TEST_CASE("sharpe ratio") {
    CHECK(sharpe_ratio(kMarket1) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(sharpe_ratio(MarketParams(0.05, 0.05, 0.3)) == 0.0);
    CHECK(sharpe_ratio(MarketParams(0.10, 0.04, 0.2)) == doctest::Approx(-0.3).epsilon(1e-15));
}

TEST_CASE("eta against high-precision re-evaluation") {
    CHECK(eta(kMarket1, kAgent1)
          == doctest::Approx(static_cast<double>(oracle::eta_ld(kP1))).epsilon(1e-14));
    CHECK(eta(kMarket1, kAgent1) == doctest::Approx(0.04625).epsilon(1e-14));

    const oracle::Params p2{0.02L, 0.08L, 0.2L, 0.5L, 0.10L};
    CHECK(eta(kMarket1, AgentParams(0.5, 0.10))
          == doctest::Approx(static_cast<double>(oracle::eta_ld(p2))).epsilon(1e-14));
    CHECK(eta(kMarket1, AgentParams(0.5, 0.10)) == doctest::Approx(0.09).epsilon(1e-14));

    // delta chosen to zero the bracket
    const double lam = sharpe_ratio(kMarket1);
    const double R = 3.0;
    const double delta0 = (1.0 - R) * (kMarket1.r + lam * lam / (2.0 * R));
    CHECK(std::fabs(eta(kMarket1, AgentParams(R, delta0))) < 1e-15);

    CHECK_THROWS_AS(eta(kMarket1, AgentParams(1.0, 0.05)), std::invalid_argument);
}

TEST_CASE("classification trichotomy") {
    const WellPosedness w = classify(kMarket1, kAgent1);
    CHECK(w.tag == Posedness::WellPosed);
    CHECK(w.rate == doctest::Approx(0.04625).epsilon(1e-14));
    CHECK(w.margin == doctest::Approx(0.04625).epsilon(1e-14));

    // eta = (0.03 - 0.055)/0.5 <= 0 with R < 1
    CHECK(classify(kMarket1, AgentParams(0.5, 0.03)).tag == Posedness::IllPosedPlusInfinity);
    // R > 1 with eta <= 0
    CHECK(classify(kMarket1, AgentParams(2.0, -0.5)).tag == Posedness::IllPosedMinusInfinity);

    // log utility: delta decides; kappa = r + lambda^2/2 breaks the tie below
    CHECK(classify(kMarket1, AgentParams(1.0, 0.05)).tag == Posedness::WellPosed);
    CHECK(classify(kMarket1, AgentParams(1.0, 0.05)).rate == 0.05);
    CHECK(classify(kMarket1, AgentParams(1.0, -0.01)).tag == Posedness::IllPosedPlusInfinity);
    const MarketParams negative_r(-0.1, -0.1, 0.2); // kappa = -0.08 <= 0
    CHECK(classify(negative_r, AgentParams(1.0, -0.01)).tag == Posedness::IllPosedMinusInfinity);
    CHECK(classify(negative_r, AgentParams(1.0, 0.0)).tag == Posedness::IllPosedMinusInfinity);
}

TEST_CASE("classify is total over random parameters") {
    oracle::TestRng rng(7);
    for (int i = 0; i < 500; ++i) {
        const MarketParams m(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             rng.uniform(0.01, 1.0));
        const AgentParams a(rng.uniform(0.05, 5.0), rng.uniform(-0.5, 0.5));
        const WellPosedness w = classify(m, a);
        const bool tagged = w.tag == Posedness::WellPosed
                         || w.tag == Posedness::IllPosedPlusInfinity
                         || w.tag == Posedness::IllPosedMinusInfinity;
        CHECK(tagged);
        if (!a.log_utility()) {
            CHECK((w.tag == Posedness::WellPosed) == (eta(m, a) > 0.0));
        }
    }
}

TEST_CASE("numeraire shift") {
    SUBCASE("gamma = 0 is the identity") {
        const auto [m2, a2] = numeraire_shift(kMarket1, kAgent1, 0.0);
        CHECK(m2.r == kMarket1.r);
        CHECK(m2.mu == kMarket1.mu);
        CHECK(m2.sigma == kMarket1.sigma);
        CHECK(a2.delta == kAgent1.delta);
    }
    SUBCASE("direct substitution at gamma = 0.01") {
        const auto [m2, a2] = numeraire_shift(kMarket1, kAgent1, 0.01);
        CHECK(m2.r == doctest::Approx(0.03).epsilon(1e-15));
        CHECK(m2.mu == doctest::Approx(0.09).epsilon(1e-15));
        CHECK(m2.sigma == 0.2);
        CHECK(a2.R == 2.0);
        CHECK(a2.delta == doctest::Approx(0.04).epsilon(1e-15));
        CHECK(eta(m2, a2) == doctest::Approx(0.04625).epsilon(1e-13));
    }
    SUBCASE("round trip") {
        const auto [m2, a2] = numeraire_shift(kMarket1, kAgent1, 0.037);
        const auto [m3, a3] = numeraire_shift(m2, a2, -0.037);
        CHECK(m3.r == doctest::Approx(kMarket1.r).epsilon(1e-14));
        CHECK(m3.mu == doctest::Approx(kMarket1.mu).epsilon(1e-14));
        CHECK(a3.delta == doctest::Approx(kAgent1.delta).epsilon(1e-14));
    }
}

TEST_CASE("invariants under the numeraire sweep") {
    const double eta0 = eta(kMarket1, kAgent1);
    const double lam0 = sharpe_ratio(kMarket1);
    for (int i = -10; i <= 10; ++i) {
        const double gamma = 0.01 * i;
        const auto [m2, a2] = numeraire_shift(kMarket1, kAgent1, gamma);
        CHECK(std::fabs(eta(m2, a2) - eta0) <= 1e-12 * std::fabs(eta0));
        CHECK(std::fabs(sharpe_ratio(m2) - lam0) <= 1e-13 * std::fabs(lam0));
    }
}

TEST_CASE("impatience rate") {
    CHECK(impatience_rate(kMarket1, kAgent1) == doctest::Approx(0.07).epsilon(1e-15));
    CHECK(impatience_rate(kMarket1, AgentParams(1.0, 0.123)) == 0.123);

    // eta re-derived from phi: eta = phi/R + ((R-1)/R) lambda^2/(2R)
    const double phi = impatience_rate(kMarket1, kAgent1);
    const double lam = sharpe_ratio(kMarket1);
    const double R = kAgent1.R;
    const double rebuilt = phi / R + (R - 1.0) / R * lam * lam / (2.0 * R);
    CHECK(std::fabs(rebuilt - eta(kMarket1, kAgent1)) <= 1e-12 * std::fabs(rebuilt));
    CHECK(rebuilt == doctest::Approx(0.07 / 2.0 + 0.5 * 0.0225).epsilon(1e-14));

    // and the identity survives the numeraire shift through phi's invariant form
    oracle::TestRng rng(11);
    for (int i = 0; i < 50; ++i) {
        const auto [m2, a2] = numeraire_shift(kMarket1, kAgent1, rng.uniform(-0.2, 0.2));
        const double phi2 = impatience_rate(m2, a2);
        const double lam2 = sharpe_ratio(m2);
        const double rebuilt2 = phi2 / a2.R + (a2.R - 1.0) / a2.R * lam2 * lam2 / (2.0 * a2.R);
        CHECK(std::fabs(rebuilt2 - eta(m2, a2)) <= 1e-12 * std::max(1.0, std::fabs(rebuilt2)));
    }
}
