// Command-line surface: solve | verify-hjb | simulate | counterexample | dual
// | numeraire | klss. Reads one JSON config (market/agent parameters at the
// top level, optional "sim" block, command-specific keys), writes JSON/CSV
// artifacts into --out-dir and the primary payload to stdout.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure.
// MERTON_THREADS caps the worker count; outputs are byte-identical for any
// value of it.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "merton/dual.hpp"
#include "merton/hjb.hpp"
#include "merton/json_io.hpp"

namespace {

using merton::ordered_json;

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> paths;
    std::optional<double> dt;
    std::optional<double> horizon;
    std::string which = "wild"; // counterexample variant
    std::optional<double> gamma;
};

ordered_json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    return doc;
}

merton::SimConfig sim_from(const ordered_json& doc, const CliOptions& opt) {
    merton::SimConfig cfg = merton::sim_config_from_json(
        doc.contains("sim") ? doc.at("sim") : ordered_json(nullptr));
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.paths) cfg.n_paths = *opt.paths;
    if (opt.dt) cfg.dt = *opt.dt;
    if (opt.horizon) cfg.horizon = *opt.horizon;
    return cfg;
}

std::vector<double> x_grid_from(const ordered_json& doc) {
    std::vector<double> grid{0.1, 0.5, 1.0, 2.0, 10.0};
    if (doc.contains("x_grid")) {
        grid.clear();
        for (const auto& v : doc.at("x_grid")) {
            if (!v.is_number()) {
                throw std::invalid_argument("'x_grid' entries must be numbers");
            }
            grid.push_back(v.get<double>());
        }
        if (grid.empty()) {
            throw std::invalid_argument("'x_grid' must be nonempty");
        }
    }
    return grid;
}

double scalar_from(const ordered_json& doc, const char* key, double fallback) {
    if (!doc.contains(key)) {
        return fallback;
    }
    if (!doc.at(key).is_number()) {
        throw std::invalid_argument(std::string("'") + key + "' must be a number");
    }
    return doc.at(key).get<double>();
}

merton::Policy policy_from(const ordered_json& doc) {
    if (!doc.contains("policy")) {
        throw std::invalid_argument("config needs a 'policy' object");
    }
    const auto& p = doc.at("policy");
    const std::string type = p.value("type", std::string("constant"));
    if (type == "constant") {
        return merton::PolicyConstant{scalar_from(p, "pi", 0.0), scalar_from(p, "xi", 0.0)};
    }
    if (type == "optimal") {
        return merton::PolicyConstant{}; // resolved by the caller against the solution
    }
    if (type == "wild") {
        return merton::PolicyWildInvestment{};
    }
    if (type == "fast") {
        return merton::PolicyFastConsumption{};
    }
    throw std::invalid_argument("unknown policy type '" + type + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

void emit(const CliOptions& opt, const std::string& stem, const ordered_json& doc,
          const std::string* csv = nullptr) {
    std::filesystem::create_directories(opt.out_dir);
    const std::string payload = doc.dump(2) + "\n";
    write_text(std::filesystem::path(opt.out_dir) / (stem + ".json"), payload);
    if (csv) {
        write_text(std::filesystem::path(opt.out_dir) / (stem + ".csv"), *csv);
    }
    if (csv && opt.format == "csv") {
        std::cout << *csv;
    } else {
        std::cout << payload;
    }
}

// ---------------------------------------------------------------------------

int cmd_solve(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const merton::WellPosedness cls = merton::classify(m, a);
    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["classification"] = merton::to_string(cls.tag);
    out["margin"] = cls.margin;
    if (cls.well_posed()) {
        const merton::ClosedFormSolution sol = merton::merton_solution(m, a);
        out["pi_hat"] = sol.pi_hat;
        out["xi_hat"] = sol.xi_hat;
        out["eta_or_delta"] = cls.rate;
        out["utility"] = sol.log_utility ? "log" : "crra";
        ordered_json samples = ordered_json::array();
        for (double x : x_grid_from(cfg)) {
            samples.push_back({{"x", x}, {"value", sol.value(x)}});
        }
        out["value_samples"] = samples;
    }
    emit(opt, "solve", out);
    return 0;
}

int cmd_verify_hjb(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const merton::ClosedFormSolution sol = merton::merton_solution(m, a);
    const std::vector<double> grid = x_grid_from(cfg);
    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["x_grid"] = grid;

    const double plain = merton::hjb_residual(sol, grid, m, a);
    out["plain"] = {{"max_scaled_residual", plain}, {"pass", plain <= 1e-10}};

    if (!sol.log_utility) {
        const double eps = scalar_from(cfg, "eps", 0.1);
        const double y = scalar_from(cfg, "y", 1.0);
        const double lambda = m.sharpe();
        double worst_eps = 0.0;
        const merton::ValueFn fn = merton::value_fn(sol);
        for (double x : grid) {
            const double z = x + eps * y;
            const merton::Maximizer mx = merton::maximize_L(z, fn(z), m, a);
            // Pull the maximizer of L back through the reduction
            // (pi, c) -> (pi x/z + lambda eps y/(sigma R z), c + eps eta y):
            // the sup of the perturbed operator is attained there and equals 0.
            const double pi_back = (mx.pi_star - lambda * eps * y / (m.sigma * a.R * z)) * z / x;
            const double c_back = mx.c_star - eps * sol.xi_hat * y;
            const double val = merton::L_eps(pi_back, c_back, x, y, eps, fn(z), m, a);
            worst_eps = std::max(worst_eps, std::fabs(val) / std::max(1.0, std::fabs(fn(z).v)));
        }
        out["perturbed"] = {{"eps", eps}, {"y", y},
                            {"max_scaled_residual", worst_eps},
                            {"pass", worst_eps <= 1e-8}};

        const double zeta = scalar_from(cfg, "zeta", 0.1);
        double worst_dn = 0.0;
        for (double x : grid) {
            const double res = merton::davis_norman_residual(zeta, x, m, a);
            worst_dn = std::max(worst_dn,
                                std::fabs(res) / std::max(1.0, std::fabs(sol.value(x + zeta))));
        }
        out["davis_norman"] = {{"zeta", zeta}, {"max_scaled_residual", worst_dn},
                               {"pass", worst_dn <= 1e-10}};
    }
    emit(opt, "verify_hjb", out);
    return 0;
}

int cmd_simulate(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const merton::SimConfig sim = sim_from(cfg, opt);
    const double x = scalar_from(cfg, "x", 1.0);
    merton::Policy policy = policy_from(cfg);
    if (cfg.at("policy").value("type", std::string("constant")) == "optimal") {
        const merton::ClosedFormSolution sol = merton::merton_solution(m, a);
        policy = merton::PolicyConstant{sol.pi_hat, sol.xi_hat};
    }

    const auto record = static_cast<std::int64_t>(
        scalar_from(cfg, "record_paths", std::min<double>(16.0, static_cast<double>(sim.n_paths))));
    merton::SimConfig record_cfg = sim;
    record_cfg.n_paths = std::clamp<std::int64_t>(record, 1, sim.n_paths);
    if (record_cfg.antithetic && record_cfg.n_paths % 2 != 0) {
        record_cfg.n_paths += 1;
    }
    merton::PathBatch batch;
    if (const auto* pc = std::get_if<merton::PolicyConstant>(&policy)) {
        batch = merton::simulate_constant_policy(x, pc->pi, pc->xi, record_cfg, m, a);
    } else {
        batch = merton::simulate_general_policy(x, policy, record_cfg, m, a);
    }
    const merton::McEstimate est = merton::mc_value(x, policy, sim, m, a);

    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["sim"] = merton::sim_config_to_json(sim);
    out["x"] = x;
    out["policy"] = cfg.at("policy");
    out["estimate"] = merton::estimate_to_json(est);
    std::ostringstream csv;
    merton::write_paths_csv(csv, batch);
    const std::string csv_text = csv.str();
    emit(opt, "simulate", out, &csv_text);
    return 0;
}

int cmd_counterexample(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const merton::SimConfig sim = sim_from(cfg, opt);
    const double x = scalar_from(cfg, "x", 1.0);
    const std::string which = cfg.contains("which")
                                  ? cfg.at("which").get<std::string>()
                                  : opt.which;
    merton::CounterexampleResult res;
    if (which == "wild") {
        res = merton::counterexample_wild(x, sim, m, a);
    } else if (which == "fast") {
        res = merton::counterexample_fast_consumption(x, sim, m, a);
    } else {
        throw std::invalid_argument("counterexample variant must be 'wild' or 'fast'");
    }
    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["which"] = which;
    out["n_paths"] = res.stats.n_paths;
    out["hit_deadline"] = res.stats.threshold;
    out["fraction_hit"] = res.stats.fraction_hit;
    out["n_probe"] = merton::estimate_to_json(res.stats.n_probe);
    out["min_wealth"] = res.stats.min_wealth;
    out["max_abs_investment"] = res.stats.max_abs_investment;
    emit(opt, "counterexample", out);
    return 0;
}

int cmd_dual(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const merton::SimConfig sim = sim_from(cfg, opt);
    const double x = scalar_from(cfg, "x", 1.0);
    const merton::ClosedFormSolution sol = merton::merton_solution(m, a);

    ordered_json checks = ordered_json::array();
    const auto add_check = [&checks](const std::string& name, const merton::McEstimate& e,
                                     bool pass) {
        checks.push_back({{"check_name", name},
                          {"estimate", e.mean},
                          {"ci95", {e.ci95_lo, e.ci95_hi}},
                          {"pass", pass}});
    };

    const merton::PathBatch batch =
        merton::simulate_constant_policy(x, sol.pi_hat, sol.xi_hat, sim, m, a);
    const merton::StatePriceDensityPath spd = merton::state_price_density(batch, m);

    const merton::McEstimate gap = merton::budget_gap(x, batch, spd, sim);
    add_check("budget_gap_optimal", gap,
              std::fabs(gap.mean) <= 3.0 * gap.std_error);

    const double foc = merton::foc_residual(x, batch, spd, sol);
    checks.push_back({{"check_name", "foc_residual"},
                      {"estimate", foc},
                      {"ci95", {foc, foc}},
                      {"pass", foc <= 1e-10}});

    const merton::McEstimate slack_opt = merton::duality_upper_bound(
        x, merton::PolicyConstant{sol.pi_hat, sol.xi_hat}, sim, m, a, sol);
    add_check("duality_slack_optimal", slack_opt,
              std::fabs(slack_opt.mean) <= 3.0 * slack_opt.std_error);

    std::vector<std::pair<double, double>> suboptimal{{0.5, 0.05}};
    if (cfg.contains("suboptimal")) {
        suboptimal.clear();
        for (const auto& p : cfg.at("suboptimal")) {
            suboptimal.emplace_back(scalar_from(p, "pi", 0.0), scalar_from(p, "xi", 0.05));
        }
    }
    for (std::size_t i = 0; i < suboptimal.size(); ++i) {
        const merton::McEstimate slack = merton::duality_upper_bound(
            x, merton::PolicyConstant{suboptimal[i].first, suboptimal[i].second}, sim, m, a, sol);
        add_check("duality_slack_suboptimal_" + std::to_string(i), slack,
                  slack.mean >= -3.0 * slack.std_error);
    }

    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["x"] = x;
    out["checks"] = checks;
    emit(opt, "dual", out);
    return 0;
}

int cmd_numeraire(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    std::vector<double> gammas;
    if (cfg.contains("gamma_grid")) {
        for (const auto& v : cfg.at("gamma_grid")) {
            gammas.push_back(v.get<double>());
        }
    } else {
        gammas.push_back(opt.gamma ? *opt.gamma : scalar_from(cfg, "gamma", 0.01));
    }
    const merton::WellPosedness base = merton::classify(m, a);
    ordered_json rows = ordered_json::array();
    bool all_match = true;
    for (double g : gammas) {
        const auto [m2, a2] = merton::numeraire_shift(m, a, g);
        const merton::WellPosedness shifted = merton::classify(m2, a2);
        const bool match = shifted.tag == base.tag
                        && std::fabs(shifted.rate - base.rate)
                               <= 1e-12 * std::max(1.0, std::fabs(base.rate));
        all_match = all_match && match;
        rows.push_back({{"gamma", g},
                        {"shifted", merton::params_to_json(m2, a2)},
                        {"rate_original", base.rate},
                        {"rate_shifted", shifted.rate},
                        {"match", match}});
    }
    ordered_json out;
    out["original"] = merton::params_to_json(m, a);
    out["classification"] = merton::to_string(base.tag);
    out["impatience_rate"] = merton::impatience_rate(m, a);
    out["results"] = rows;
    out["match"] = all_match;
    emit(opt, "numeraire", out);
    return 0;
}

int cmd_klss(const CliOptions& opt) {
    const ordered_json cfg = load_config(opt.config_path);
    const auto [m, a] = merton::params_from_json(cfg);
    const double x = scalar_from(cfg, "x", 1.0);
    std::vector<double> P_values{-1e2, -1e4, -1e6, -1e8};
    if (cfg.contains("P_values")) {
        P_values.clear();
        for (const auto& v : cfg.at("P_values")) {
            P_values.push_back(v.get<double>());
        }
    }
    const merton::ClosedFormSolution sol = merton::merton_solution(m, a);
    const double vhat = sol.value(x);

    std::ostringstream csv;
    csv << "P,value,roundtrip_residual\n";
    ordered_json rows = ordered_json::array();
    bool monotone = true;
    double prev = 0.0;
    bool first = true;
    double last_value = 0.0;
    for (double P : P_values) {
        const merton::BankruptcyValue bv = merton::klss_solution(P, m, a);
        const double c = bv.consumption(x);
        const double rt = std::fabs(bv.forward(c) - x) / x;
        const double value = bv.value(x);
        csv << merton::format_double(P) << ',' << merton::format_double(value) << ','
            << merton::format_double(rt) << '\n';
        rows.push_back({{"P", P}, {"nu", bv.nu}, {"value", value}, {"roundtrip_residual", rt}});
        if (!first && value >= prev) {
            monotone = false;
        }
        prev = value;
        first = false;
        last_value = value;
    }
    ordered_json out;
    out["params"] = merton::params_to_json(m, a);
    out["x"] = x;
    out["vhat"] = vhat;
    out["rows"] = rows;
    out["monotone_decreasing"] = monotone;
    out["limit_gap_rel"] = std::fabs(last_value - vhat) / std::fabs(vhat);
    const std::string csv_text = csv.str();
    emit(opt, "klss", out, &csv_text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-form solution and numerical verification toolkit for the "
                 "infinite-horizon investment-consumption problem"};
    app.require_subcommand(1);
    CliOptions opt;

    const auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        sub->add_option("config,--config", opt.config_path, "JSON config file")
            ->required(needs_config);
        sub->add_option("--out-dir", opt.out_dir, "directory for JSON/CSV artifacts");
        sub->add_option("--format", opt.format, "stdout payload: json or csv")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--seed", opt.seed, "RNG seed override");
        sub->add_option("--paths", opt.paths, "path count override");
        sub->add_option("--dt", opt.dt, "time step override");
        sub->add_option("--horizon", opt.horizon, "horizon override");
    };

    auto* solve = app.add_subcommand("solve", "closed-form solution and classification");
    add_common(solve);
    auto* verify = app.add_subcommand("verify-hjb", "residuals of the dynamic-programming equation");
    add_common(verify);
    auto* simulate = app.add_subcommand("simulate", "paths and Monte Carlo objective estimate");
    add_common(simulate);
    auto* cex = app.add_subcommand("counterexample", "supermartingale-failure strategies");
    add_common(cex);
    cex->add_option("--which", opt.which, "wild or fast")
        ->check(CLI::IsMember({"wild", "fast"}));
    auto* dual = app.add_subcommand("dual", "budget, first-order, and duality checks");
    add_common(dual);
    auto* numeraire = app.add_subcommand("numeraire", "accounting-unit invariance");
    add_common(numeraire);
    numeraire->add_option("--gamma", opt.gamma, "numeraire growth rate");
    auto* klss = app.add_subcommand("klss", "bankruptcy-value solution and its limit");
    add_common(klss);

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return cmd_solve(opt);
        if (verify->parsed()) return cmd_verify_hjb(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (cex->parsed()) return cmd_counterexample(opt);
        if (dual->parsed()) return cmd_dual(opt);
        if (numeraire->parsed()) return cmd_numeraire(opt);
        if (klss->parsed()) return cmd_klss(opt);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        app.exit(e);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
