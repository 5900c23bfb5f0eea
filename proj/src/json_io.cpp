#include "merton/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace merton {

namespace {

double number_at(const ordered_json& doc, const char* key) {
    if (!doc.contains(key)) {
        throw std::invalid_argument(std::string("missing parameter '") + key + "'");
    }
    const auto& v = doc.at(key);
    if (!v.is_number()) {
        throw std::invalid_argument(std::string("parameter '") + key + "' must be a number");
    }
    return v.get<double>();
}

} // namespace

std::pair<MarketParams, AgentParams> params_from_json(const ordered_json& doc) {
    if (!doc.is_object()) {
        throw std::invalid_argument("parameter document must be a JSON object");
    }
    MarketParams m(number_at(doc, "r"), number_at(doc, "mu"), number_at(doc, "sigma"));
    AgentParams a(number_at(doc, "R"), number_at(doc, "delta"));
    return {m, a};
}

ordered_json params_to_json(const MarketParams& m, const AgentParams& a) {
    ordered_json doc;
    doc["r"] = m.r;
    doc["mu"] = m.mu;
    doc["sigma"] = m.sigma;
    doc["R"] = a.R;
    doc["delta"] = a.delta;
    return doc;
}

SimConfig sim_config_from_json(const ordered_json& doc) {
    SimConfig cfg;
    if (doc.is_null()) {
        return cfg;
    }
    if (!doc.is_object()) {
        throw std::invalid_argument("'sim' must be a JSON object");
    }
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_unsigned()) {
            throw std::invalid_argument("'seed' must be an unsigned integer");
        }
        cfg.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("n_paths")) {
        if (!doc.at("n_paths").is_number_integer()) {
            throw std::invalid_argument("'n_paths' must be an integer");
        }
        cfg.n_paths = doc.at("n_paths").get<std::int64_t>();
    }
    if (doc.contains("dt")) {
        cfg.dt = number_at(doc, "dt");
    }
    if (doc.contains("horizon")) {
        cfg.horizon = number_at(doc, "horizon");
    }
    if (doc.contains("antithetic")) {
        if (!doc.at("antithetic").is_boolean()) {
            throw std::invalid_argument("'antithetic' must be a boolean");
        }
        cfg.antithetic = doc.at("antithetic").get<bool>();
    }
    return cfg;
}

ordered_json sim_config_to_json(const SimConfig& cfg) {
    ordered_json doc;
    doc["seed"] = cfg.seed;
    doc["n_paths"] = cfg.n_paths;
    doc["dt"] = cfg.dt;
    doc["horizon"] = cfg.horizon;
    doc["antithetic"] = cfg.antithetic;
    return doc;
}

ordered_json estimate_to_json(const McEstimate& e) {
    ordered_json doc;
    doc["mean"] = e.mean;
    doc["std_error"] = e.std_error;
    doc["ci95_lo"] = e.ci95_lo;
    doc["ci95_hi"] = e.ci95_hi;
    doc["n_effective"] = e.n_effective;
    if (e.tail_bound) {
        doc["tail_bound"] = *e.tail_bound;
    } else {
        doc["tail_bound"] = nullptr;
    }
    doc["divergent"] = e.divergent;
    doc["horizon_warning"] = e.horizon_warning;
    return doc;
}

ordered_json classification_to_json(const WellPosedness& cls) {
    ordered_json doc;
    doc["classification"] = to_string(cls.tag);
    doc["rate"] = cls.rate;
    doc["margin"] = cls.margin;
    return doc;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch) {
    os << "path_id,t,W,X,C\n";
    const std::size_t width = batch.times.size();
    for (std::int64_t p = 0; p < batch.n_paths; ++p) {
        const std::size_t row = static_cast<std::size_t>(p) * width;
        for (std::size_t k = 0; k < width; ++k) {
            os << p << ',' << format_double(batch.times[k]) << ','
               << format_double(batch.W[row + k]) << ',' << format_double(batch.X[row + k])
               << ',' << format_double(batch.C[row + k]) << '\n';
        }
    }
}

} // namespace merton
