#include "viscal/serialization.hpp"

#include "viscal/errors.hpp"

#include <fstream>
#include <ostream>

namespace viscal {

namespace {

template <std::size_t N>
std::array<double, N> read_array(const Json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != N) {
        throw ParseError(0, std::string("field '") + key + "' must have " + std::to_string(N) +
                                " entries");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
    return out;
}

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ParseError(0, e.what());
    }
}

}  // namespace

Json to_json(const MixtureParams& p, double x_max) {
    Json j;
    j["model"] = "mixture";
    j["gamma_w"] = p.gamma_w;
    j["a"] = p.a;
    j["b"] = p.b;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["x_max"] = x_max;
    j["has_hres"] = p.has_hres;
    j["has_ctrl"] = p.has_ctrl;
    return j;
}

MixtureParams mixture_from_json(const Json& j, double* x_max) {
    return guarded([&] {
        MixtureParams p;
        p.gamma_w = j.at("gamma_w").get<double>();
        p.a = read_array<6>(j, "a");
        p.b = read_array<2>(j, "b");
        p.alpha = read_array<6>(j, "alpha");
        p.beta = read_array<2>(j, "beta");
        p.has_hres = j.at("has_hres").get<bool>();
        p.has_ctrl = j.at("has_ctrl").get<bool>();
        if (x_max != nullptr) *x_max = j.at("x_max").get<double>();
        return p;
    });
}

Json to_json(const BmaParams& p) {
    Json j;
    j["model"] = "bma";
    j["x_max"] = p.x_max;
    j["c0"] = p.c0;
    j["c1"] = p.c1;
    Json groups = Json::object();
    for (const auto& [g, gp] : p.groups) {
        groups[std::string(to_string(g))] = {{"pi0", gp.pi0},   {"pi1", gp.pi1},
                                             {"rho0", gp.rho0}, {"rho1", gp.rho1},
                                             {"weight", gp.weight}};
    }
    j["groups"] = std::move(groups);
    return j;
}

BmaParams bma_from_json(const Json& j) {
    return guarded([&] {
        BmaParams p;
        p.x_max = j.at("x_max").get<double>();
        p.c0 = j.at("c0").get<double>();
        p.c1 = j.at("c1").get<double>();
        for (const auto& [name, g] : j.at("groups").items()) {
            BmaGroupParams gp;
            gp.pi0 = g.at("pi0").get<double>();
            gp.pi1 = g.at("pi1").get<double>();
            gp.rho0 = g.at("rho0").get<double>();
            gp.rho1 = g.at("rho1").get<double>();
            gp.weight = g.at("weight").get<double>();
            p.groups[parse_member_group(name)] = gp;
        }
        return p;
    });
}

Json to_json(const VerificationReport& r) {
    Json j;
    j["interval_level"] = r.interval_level;
    Json leads = Json::array();
    for (const auto& lead : r.leads) {
        Json l;
        l["lead_h"] = lead.lead_h;
        l["cases"] = lead.cases;
        l["excluded"] = lead.excluded;
        Json methods = Json::object();
        for (const auto& m : lead.methods) {
            Json mj;
            Json metrics = Json::object();
            for (const auto& mv : m.metrics) {
                Json v{{"value", mv.value}};
                if (mv.ci) {
                    v["ci_lo"] = mv.ci->lo;
                    v["ci_hi"] = mv.ci->hi;
                }
                metrics[mv.name] = std::move(v);
            }
            mj["metrics"] = std::move(metrics);
            if (!m.pit_histogram.empty()) mj["pit_histogram"] = m.pit_histogram;
            if (!m.rank_histogram.empty()) mj["rank_histogram"] = m.rank_histogram;
            if (!m.notices.empty()) mj["notices"] = m.notices;
            methods[m.method] = std::move(mj);
        }
        l["methods"] = std::move(methods);
        leads.push_back(std::move(l));
    }
    j["leads"] = std::move(leads);
    Json pct = Json::object();
    for (const auto& [name, v] : r.crps_pct_of_baseline) pct[name] = v;
    j["crps_pct_of_baseline"] = std::move(pct);
    return j;
}

void write_report_csv(const VerificationReport& r, std::ostream& out) {
    out << "lead_h,method,metric,value,ci_lo,ci_hi\n";
    for (const auto& lead : r.leads) {
        for (const auto& m : lead.methods) {
            for (const auto& mv : m.metrics) {
                out << lead.lead_h << ',' << m.method << ',' << mv.name << ','
                    << format_number(mv.value) << ',';
                if (mv.ci) out << format_number(mv.ci->lo) << ',' << format_number(mv.ci->hi);
                else out << ',';
                out << '\n';
            }
        }
    }
    for (const auto& [name, v] : r.crps_pct_of_baseline) {
        out << "all," << name << ",crps_pct_of_baseline," << format_number(v) << ",,\n";
    }
}

void write_clusters_csv(const ClusterAssignment& a, std::ostream& out) {
    out << "date,station,cluster\n";
    for (const auto& [s, c] : a.cluster) out << format_date(a.valid_for_day) << ',' << s.value << ',' << c << '\n';
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace viscal
