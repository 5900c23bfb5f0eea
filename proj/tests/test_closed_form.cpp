#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "merton/closed_form.hpp"
#include "support.hpp"

using namespace merton;

namespace {
const MarketParams kMarket1(0.02, 0.08, 0.2);
const AgentParams kAgent1(2.0, 0.05);   // P1
const AgentParams kAgent2(0.5, 0.10);   // P2
const oracle::Params kP1{0.02L, 0.08L, 0.2L, 2.0L, 0.05L};
const oracle::Params kP2{0.02L, 0.08L, 0.2L, 0.5L, 0.10L};

double rel_err(double got, long double want) {
    return std::fabs(got - static_cast<double>(want))
         / std::max(1e-300, std::fabs(static_cast<double>(want)));
}
} // namespace

TEST_CASE("F values") {
    CHECK(rel_err(F(0.5, 0.05, kMarket1, kAgent1), oracle::F_ld(kP1, 0.5L, 0.05L)) < 1e-14);
    CHECK(F(0.5, 0.05, kMarket1, kAgent1) == doctest::Approx(0.04).epsilon(1e-13));

    // F(pi_hat, eta) = eta, the identity behind the optimal transversality rate
    const double et = eta(kMarket1, kAgent1);
    const double pi_hat = 0.06 / (0.04 * 2.0);
    CHECK(std::fabs(F(pi_hat, et, kMarket1, kAgent1) - et) <= 1e-14 * et);

    // linear in xi with slope -(1-R); for R = 2 raising xi by d lowers F by d
    oracle::TestRng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double pi = rng.uniform(-2.0, 2.0);
        const double xi = rng.uniform(0.01, 0.5);
        const double d = rng.uniform(0.0, 0.3);
        const double lhs = F(pi, xi + d, kMarket1, kAgent1);
        const double rhs = F(pi, xi, kMarket1, kAgent1) - d;
        CHECK(std::fabs(lhs - rhs) <= 1e-13 * std::max(1.0, std::fabs(rhs)));
    }
    CHECK_THROWS_AS(F(0.5, 0.05, kMarket1, AgentParams(1.0, 0.05)), std::invalid_argument);
}

TEST_CASE("constant policy value") {
    CHECK(rel_err(constant_policy_value(0.5, 0.05, 1.0, kMarket1, kAgent1),
                  oracle::constant_value_ld(kP1, 0.5L, 0.05L, 1.0L)) < 1e-13);
    CHECK(constant_policy_value(0.5, 0.05, 1.0, kMarket1, kAgent1)
          == doctest::Approx(-500.0).epsilon(1e-12));

    // at the candidate optimum this is the candidate value
    const ClosedFormSolution sol = merton_solution(kMarket1, kAgent1);
    CHECK(rel_err(constant_policy_value(sol.pi_hat, sol.xi_hat, 1.0, kMarket1, kAgent1),
                  oracle::crra_value_ld(kP1, 1.0L)) < 1e-13);

    CHECK(rel_err(constant_policy_value(3.0, 0.09, 1.0, kMarket1, kAgent2),
                  oracle::constant_value_ld(kP2, 3.0L, 0.09L, 1.0L)) < 1e-13);
    CHECK(constant_policy_value(3.0, 0.09, 1.0, kMarket1, kAgent2)
          == doctest::Approx(20.0 / 3.0).epsilon(1e-12));

    // F <= 0: the integral has no finite value and the sign follows the utility
    CHECK(constant_policy_value(0.75, 1.0, 1.0, kMarket1, kAgent1)
          == -std::numeric_limits<double>::infinity());
    CHECK(constant_policy_value(3.0, 0.01, 1.0, kMarket1, AgentParams(0.5, 0.01))
          == std::numeric_limits<double>::infinity());

    CHECK_THROWS_AS(constant_policy_value(0.5, 0.0, 1.0, kMarket1, kAgent1),
                    std::invalid_argument);
    CHECK_THROWS_AS(constant_policy_value(0.5, -0.1, 1.0, kMarket1, kAgent1),
                    std::invalid_argument);
}

TEST_CASE("candidate solution") {
    SUBCASE("P1") {
        const ClosedFormSolution sol = merton_solution(kMarket1, kAgent1);
        CHECK(sol.pi_hat == doctest::Approx(0.75).epsilon(1e-14));
        CHECK(sol.xi_hat == doctest::Approx(0.04625).epsilon(1e-14));
        CHECK(rel_err(sol.value(1.0), oracle::crra_value_ld(kP1, 1.0L)) < 1e-13);
        CHECK(sol.value(1.0) == doctest::Approx(-467.494521548575).epsilon(1e-10));
    }
    SUBCASE("P2") {
        const ClosedFormSolution sol = merton_solution(kMarket1, kAgent2);
        CHECK(sol.pi_hat == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(sol.xi_hat == doctest::Approx(0.09).epsilon(1e-14));
        CHECK(rel_err(sol.value(1.0), oracle::crra_value_ld(kP2, 1.0L)) < 1e-13);
    }
    SUBCASE("log utility") {
        const ClosedFormSolution sol = merton_solution(kMarket1, AgentParams(1.0, 0.05));
        CHECK(sol.log_utility);
        CHECK(sol.pi_hat == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(sol.xi_hat == 0.05);
        const oracle::Params plog{0.02L, 0.08L, 0.2L, 1.0L, 0.05L};
        CHECK(rel_err(sol.value(1.0), oracle::log_value_ld(plog, 1.0L)) < 1e-13);
        CHECK(sol.value(1.0) == doctest::Approx(-53.9146).epsilon(1e-5));
        CHECK(sol.value_dx(1.0) == doctest::Approx(1.0 / 0.05).epsilon(1e-14));
        CHECK(sol.value_dxx(1.0) < 0.0);
    }
    SUBCASE("zero risk premium means zero risky holding") {
        const MarketParams flat(0.03, 0.03, 0.4);
        for (double R : {0.5, 1.0, 2.0}) {
            const ClosedFormSolution sol = merton_solution(flat, AgentParams(R, 0.05));
            CHECK(sol.pi_hat == 0.0);
        }
    }
    SUBCASE("ill-posed input carries its classification") {
        try {
            merton_solution(kMarket1, AgentParams(0.5, 0.03));
            FAIL("expected IllPosedError");
        } catch (const IllPosedError& e) {
            CHECK(e.classification().tag == Posedness::IllPosedPlusInfinity);
        }
        try {
            merton_solution(kMarket1, AgentParams(2.0, -0.5));
            FAIL("expected IllPosedError");
        } catch (const IllPosedError& e) {
            CHECK(e.classification().tag == Posedness::IllPosedMinusInfinity);
        }
    }
}

TEST_CASE("value function shape") {
    for (const AgentParams& a : {kAgent1, kAgent2, AgentParams(1.0, 0.05)}) {
        const ClosedFormSolution sol = merton_solution(kMarket1, a);
        for (double x : {0.1, 0.5, 1.0, 2.0, 10.0}) {
            CHECK(sol.value_dx(x) > 0.0);
            CHECK(sol.value_dxx(x) < 0.0);
        }
    }
    // homogeneity: value(kx) = k^{1-R} value(x)
    for (const AgentParams& a : {kAgent1, kAgent2}) {
        const ClosedFormSolution sol = merton_solution(kMarket1, a);
        for (double k : {0.5, 2.0, 10.0}) {
            for (double x : {0.3, 1.0, 4.0}) {
                const double lhs = sol.value(k * x);
                const double rhs = pow_pos(k, 1.0 - a.R) * sol.value(x);
                CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::fabs(rhs));
            }
        }
    }
}

TEST_CASE("turning point of the constant-policy value") {
    for (const AgentParams& a : {kAgent1, kAgent2}) {
        const ClosedFormSolution sol = merton_solution(kMarket1, a);
        const int n = 81;
        const double pi_lo = sol.pi_hat - 0.4, dpi = 0.8 / (n - 1);
        const double xi_lo = sol.xi_hat * 0.6, dxi = sol.xi_hat * 0.8 / (n - 1);
        double best = -1e300;
        int best_i = -1, best_j = -1;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double v = constant_policy_value(pi_lo + dpi * i, xi_lo + dxi * j, 1.0,
                                                       kMarket1, a);
                if (v > best) {
                    best = v;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        CHECK(std::fabs(pi_lo + dpi * best_i - sol.pi_hat) <= dpi);
        CHECK(std::fabs(xi_lo + dxi * best_j - sol.xi_hat) <= dxi);
    }
}

TEST_CASE("CRRA approaches the log solution as R -> 1") {
    const ClosedFormSolution log_sol = merton_solution(kMarket1, AgentParams(1.0, 0.05));
    for (double R : {1.1, 1.01, 1.001}) {
        const ClosedFormSolution sol = merton_solution(kMarket1, AgentParams(R, 0.05));
        const double gap = std::fabs(R - 1.0);
        CHECK(std::fabs(sol.pi_hat - log_sol.pi_hat) <= 2.0 * log_sol.pi_hat * gap);
        CHECK(std::fabs(sol.xi_hat - log_sol.xi_hat) <= 1.0 * gap);
    }
}

TEST_CASE("perturbed value") {
    const ClosedFormSolution sol = merton_solution(kMarket1, kAgent1);
    CHECK(rel_err(perturbed_value(0.1, 1.0, kMarket1, kAgent1),
                  oracle::crra_value_ld(kP1, 1.1L)) < 1e-13);
    // homogeneity route for R = 2: V(1.1) = V(1)/1.1
    CHECK(perturbed_value(0.1, 1.0, kMarket1, kAgent1)
          == doctest::Approx(sol.value(1.0) / 1.1).epsilon(1e-13));
    // additivity of the argument
    CHECK(perturbed_value(0.1, 0.9, kMarket1, kAgent1)
          == doctest::Approx(sol.value(1.0)).epsilon(1e-13));
    // eps -> 0 continuity
    CHECK(perturbed_value(1e-9, 1.0, kMarket1, kAgent1)
          == doctest::Approx(sol.value(1.0)).epsilon(1e-8));
    CHECK_THROWS_AS(perturbed_value(0.0, 1.0, kMarket1, kAgent1), std::invalid_argument);
    CHECK_THROWS_AS(perturbed_value(-0.1, 1.0, kMarket1, kAgent1), std::invalid_argument);
}

TEST_CASE("shifted value function") {
    const ShiftedValue sv = davis_norman_value(0.1, kMarket1, kAgent1);
    const ClosedFormSolution sol = merton_solution(kMarket1, kAgent1);
    CHECK(sv.value(1.0) == sol.value(1.1));
    CHECK(sv.value_dx(1.0) == sol.value_dx(1.1));
    CHECK(sv.value_dxx(1.0) == sol.value_dxx(1.1));
    CHECK(davis_norman_value(1e-9, kMarket1, kAgent1).value(1.0)
          == doctest::Approx(sol.value(1.0)).epsilon(1e-8));
    CHECK_THROWS_AS(davis_norman_value(0.0, kMarket1, kAgent1), std::invalid_argument);
    CHECK_THROWS_AS(davis_norman_value(0.1, kMarket1, AgentParams(1.0, 0.05)),
                    std::invalid_argument);
}

TEST_CASE("bankruptcy root") {
    const double nu = klss_nu(kMarket1, kAgent1);
    CHECK(nu < 0.0);
    // polynomial-residual oracle
    CHECK(std::fabs(static_cast<double>(oracle::klss_poly_ld(kP1, nu))) < 1e-12);
    CHECK(nu == doctest::Approx(-0.4677080791).epsilon(1e-8));

    // discriminant stays positive whenever r > 0 and lambda != 0
    oracle::TestRng rng(17);
    for (int i = 0; i < 50; ++i) {
        const double r = rng.uniform(0.001, 0.2);
        const MarketParams m(r, r + rng.uniform(0.001, 0.3), rng.uniform(0.05, 0.6));
        const AgentParams a(rng.uniform(1.01, 6.0), rng.uniform(0.001, 0.3));
        const double root = klss_nu(m, a);
        CHECK(root < 0.0);
        CHECK(std::fabs(static_cast<double>(oracle::klss_poly_ld(
                  {m.r, m.mu, m.sigma, a.R, a.delta}, root)))
              < 1e-10 * a.R * a.R);
    }

    // lambda = 0 degenerates to a linear equation
    const MarketParams flat(0.02, 0.02, 0.2);
    CHECK(klss_nu(flat, AgentParams(2.0, 0.05)) == doctest::Approx(-4.0 / 3.0).epsilon(1e-13));
    CHECK_THROWS_AS(klss_nu(flat, AgentParams(2.0, 0.01)), std::invalid_argument); // delta < r

    // regime gates
    CHECK_THROWS_AS(klss_nu(kMarket1, AgentParams(0.5, 0.05)), std::invalid_argument);
    CHECK_THROWS_AS(klss_nu(kMarket1, AgentParams(2.0, -0.01)), std::invalid_argument);
    CHECK_THROWS_AS(klss_nu(MarketParams(-0.01, 0.08, 0.2), kAgent1), std::invalid_argument);
}

TEST_CASE("bankruptcy value function") {
    const ClosedFormSolution sol = merton_solution(kMarket1, kAgent1);

    SUBCASE("inversion round trip") {
        const BankruptcyValue bv = klss_solution(-100.0, kMarket1, kAgent1);
        for (double x = 0.1; x <= 10.0; x += 0.3) {
            const double c = bv.consumption(x);
            CHECK(std::fabs(bv.forward(c) - x) <= 1e-10 * x);
        }
    }
    SUBCASE("boundary value near zero wealth") {
        for (double P : {-1.0, -100.0, -1e4}) {
            const BankruptcyValue bv = klss_solution(P, kMarket1, kAgent1);
            CHECK(std::fabs(bv.value(1e-8) - P) <= 1e-4 * std::fabs(P));
        }
    }
    SUBCASE("monotone limit towards the unconstrained value") {
        double prev = 0.0;
        bool first = true;
        double last = 0.0;
        for (double P : {-1e2, -1e4, -1e6, -1e8}) {
            const double v = klss_value(P, 1.0, kMarket1, kAgent1);
            CHECK(v > sol.value(1.0));
            CHECK(v > P);
            if (!first) {
                CHECK(v < prev);
            }
            prev = v;
            first = false;
            last = v;
        }
        CHECK(std::fabs(last - sol.value(1.0)) / std::fabs(sol.value(1.0)) < 1e-3);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(klss_solution(0.0, kMarket1, kAgent1), std::invalid_argument);
        CHECK_THROWS_AS(klss_solution(1.0, kMarket1, kAgent1), std::invalid_argument);
        CHECK_THROWS_AS(klss_solution(-1.0, kMarket1, AgentParams(0.5, 0.05)),
                        std::invalid_argument);
    }
}
