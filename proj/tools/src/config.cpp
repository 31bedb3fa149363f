#include "config.hpp"

#include <viscal/errors.hpp>
#include <viscal/serialization.hpp>

namespace viscal::cli {

std::string to_string(ModelKind m) { return m == ModelKind::Mixture ? "mixture" : "bma"; }

ModelKind parse_model(const std::string& s) {
    if (s == "mixture") return ModelKind::Mixture;
    if (s == "bma") return ModelKind::Bma;
    throw ParameterError("unknown model '" + s + "' (expected mixture or bma)");
}

int RunConfig::window_days() const {
    if (window_set) return plan.window_days;
    return model == ModelKind::Mixture ? 350 : 25;
}

void RunConfig::validate() const {
    if (data.empty()) throw ParameterError("config: no data path");
    if (!(x_max > 0.0)) throw ParameterError("config: x_max must be positive");
    auto p = plan;
    p.window_days = window_days();
    p.validate();
    if (verify_start && verify_end && *verify_end < *verify_start) {
        throw ParameterError("config: verification end precedes start");
    }
    for (double t : thresholds) {
        if (!(t > 0.0 && t < x_max)) throw ParameterError("config: thresholds must lie in (0, x_max)");
    }
    if (mc_samples < 2) throw ParameterError("config: mc_samples must be at least 2");
}

RunConfig load_config(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& s) {
        std::filesystem::path p(s);
        return p.is_absolute() ? p : base / p;
    };
    RunConfig c;
    try {
        if (j.contains("data")) c.data = resolve(j["data"].get<std::string>());
        if (j.contains("out")) c.out = resolve(j["out"].get<std::string>());
        c.x_max = j.value("x_max", c.x_max);
        if (j.contains("model")) c.model = parse_model(j["model"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.jobs = j.value("jobs", c.jobs);
        if (j.contains("training")) {
            const auto& t = j["training"];
            if (t.contains("window")) {
                c.plan.window_days = t["window"].get<int>();
                c.window_set = true;
            }
            if (t.contains("mode")) c.plan.mode = parse_spatial_mode(t["mode"].get<std::string>());
            c.plan.clusters = t.value("clusters", c.plan.clusters);
            c.plan.min_cases = t.value("min_cases", c.plan.min_cases);
            c.plan.feature_quantile_count = t.value("feature_quantiles", c.plan.feature_quantile_count);
        }
        if (j.contains("verification")) {
            const auto& v = j["verification"];
            if (v.contains("start")) c.verify_start = parse_date(v["start"].get<std::string>());
            if (v.contains("end")) c.verify_end = parse_date(v["end"].get<std::string>());
            if (v.contains("leads")) c.leads = v["leads"].get<std::vector<int>>();
            c.climatology_size = v.value("climatology_size", c.climatology_size);
            c.climatology_pooled = v.value("climatology_pooled", c.climatology_pooled);
            if (v.contains("thresholds")) c.thresholds = v["thresholds"].get<std::vector<double>>();
            c.mc_samples = v.value("mc_samples", c.mc_samples);
            c.bootstrap_replicates = v.value("bootstrap", c.bootstrap_replicates);
            c.block_length = v.value("block_length", c.block_length);
        }
    } catch (const Json::exception& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
    return c;
}

}  // namespace viscal::cli
