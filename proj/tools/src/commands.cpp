#include "commands.hpp"

#include <viscal/bma_model.hpp>
#include <viscal/climatology.hpp>
#include <viscal/errors.hpp>
#include <viscal/mixture_model.hpp>
#include <viscal/serialization.hpp>
#include <viscal/training.hpp>
#include <viscal/verification.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace viscal::cli {

namespace fs = std::filesystem;

namespace {

std::mutex log_mutex;

void log(const std::string& msg) {
    const std::lock_guard lock(log_mutex);
    std::cerr << msg << '\n';
}

// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
void run_parallel(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    std::vector<std::exception_ptr> errors(n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<MemberGroup> member_groups(const Dataset& data) {
    std::vector<MemberGroup> g;
    if (data.has_hres) g.push_back(MemberGroup::Hres);
    if (data.has_ctrl) g.push_back(MemberGroup::Ctrl);
    g.push_back(MemberGroup::Ens);
    return g;
}

std::size_t raw_size(const Dataset& data) {
    return kEnsembleSize + (data.has_hres ? 1 : 0) + (data.has_ctrl ? 1 : 0);
}

std::vector<double> raw_members(const ForecastCase& fc) {
    std::vector<double> m = fc.f_ens;
    if (fc.f_hres) m.push_back(*fc.f_hres);
    if (fc.f_ctrl) m.push_back(*fc.f_ctrl);
    return m;
}

class Session {
public:
    explicit Session(const RunConfig& cfg)
        : cfg_(cfg), data_(load_dataset(cfg.data, cfg.x_max)), index_(data_) {
        cfg_.validate();
        plan_ = cfg_.plan;
        plan_.window_days = cfg_.window_days();
        leads_ = cfg_.leads.empty() ? data_.lead_times() : cfg_.leads;
        if (data_.cases.empty()) throw FitError("dataset " + cfg_.data.string() + " has no cases");
        Date first = data_.cases.front().init_date;
        Date last = first;
        for (const auto& c : data_.cases) {
            first = std::min(first, c.init_date);
            last = std::max(last, c.init_date);
        }
        int max_lead = 0;
        for (int l : leads_) max_lead = std::max(max_lead, l);
        start_ = cfg_.verify_start.value_or(first + std::chrono::days(plan_.window_days + lead_days(max_lead)));
        end_ = cfg_.verify_end.value_or(last);
        if (data_.clamped_values > 0) {
            log("note: " + std::to_string(data_.clamped_values) + " values above x_max clamped");
        }
    }

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    [[nodiscard]] const RunConfig& cfg() const { return cfg_; }
    [[nodiscard]] const Dataset& data() const { return data_; }
    [[nodiscard]] const CaseIndex& index() const { return index_; }
    [[nodiscard]] const TrainingPlan& plan() const { return plan_; }
    [[nodiscard]] const std::vector<int>& leads() const { return leads_; }

    [[nodiscard]] std::vector<Date> days() const {
        std::vector<Date> out;
        for (Date d = start_; d <= end_; d += std::chrono::days(1)) out.push_back(d);
        return out;
    }

    [[nodiscard]] fs::path param_dir() const { return cfg_.out / "params"; }

private:
    RunConfig cfg_;
    Dataset data_;
    CaseIndex index_;
    TrainingPlan plan_;
    std::vector<int> leads_;
    Date start_{};
    Date end_{};
};

// ---------------------------------------------------------------- fitting

struct UnitFit {
    Json params;
    std::optional<MixtureParams> mixture;
};

UnitFit fit_cases(const Session& s, const std::vector<ForecastCase>& cases,
                  const std::optional<MixtureParams>& warm) {
    const auto& data = s.data();
    if (s.cfg().model == ModelKind::Mixture) {
        std::vector<MixtureCase> mc;
        mc.reserve(cases.size());
        for (const auto& c : cases) mc.push_back(make_mixture_case(c));
        MixtureFitOptions opt;
        opt.min_cases = s.plan().min_cases;
        auto fit = fit_mixture(mc, data.has_hres, data.has_ctrl, warm, opt);
        UnitFit out{to_json(fit.params, data.x_max), fit.params};
        out.params["converged"] = fit.converged;
        out.params["objective"] = fit.objective;
        return out;
    }
    const auto groups = member_groups(data);
    const auto bc = make_bma_cases(cases, groups);
    if (bc.size() < s.plan().min_cases) {
        throw FitError("BMA fit needs " + std::to_string(s.plan().min_cases) + " cases, got " +
                       std::to_string(bc.size()));
    }
    auto fit = fit_bma(bc, groups, data.x_max);
    UnitFit out{to_json(fit.params), std::nullopt};
    out.params["converged"] = fit.converged;
    out.params["em_iterations"] = fit.iterations;
    return out;
}

Json station_list(const std::vector<StationId>& stations) {
    Json j = Json::array();
    for (const auto& st : stations) j.push_back(st.value);
    return j;
}

void fit_lead(const Session& s, int lead) {
    const auto& plan = s.plan();
    std::optional<ClusterAssignment> previous;
    std::map<std::string, MixtureParams> warm;
    std::size_t written = 0;

    for (Date d : s.days()) {
        if (s.index().issued(lead, d).empty()) continue;
        std::optional<ClusterAssignment> assignment;
        if (plan.mode == SpatialMode::SemiLocal) {
            assignment = cluster_stations(s.index(), d, lead, plan, s.cfg().seed,
                                          previous ? &*previous : nullptr);
            previous = assignment;
        }
        auto units = assemble(s.index(), d, lead, plan, assignment ? &*assignment : nullptr);
        for (const auto& u : units) {
            for (const auto& c : u.cases) {
                if (c.valid_date() >= d) {
                    throw std::logic_error("training case valid on " + format_date(c.valid_date()) +
                                           " leaks into the fit for " + format_date(d));
                }
            }
        }

        std::optional<std::optional<UnitFit>> regional;  // fitted on first need
        auto regional_fit = [&]() -> const std::optional<UnitFit>& {
            if (!regional) {
                TrainingPlan rp = plan;
                rp.mode = SpatialMode::Regional;
                auto ru = assemble(s.index(), d, lead, rp);
                try {
                    const auto w = warm.find("regional");
                    regional = fit_cases(s, ru.front().cases,
                                         w == warm.end() ? std::nullopt
                                                         : std::optional<MixtureParams>(w->second));
                    if ((*regional)->mixture) warm["regional"] = *(*regional)->mixture;
                } catch (const std::exception& e) {
                    log("lead " + std::to_string(lead) + " " + format_date(d) +
                        ": regional fallback failed: " + e.what());
                    regional = std::optional<UnitFit>{};
                }
            }
            return *regional;
        };

        for (const auto& u : units) {
            std::optional<UnitFit> fit;
            std::string fallback;
            const bool is_regional = plan.mode == SpatialMode::Regional;
            if (u.below_minimum) {
                fallback = "below minimum (" + std::to_string(u.cases.size()) + " cases)";
            } else {
                try {
                    const auto w = warm.find(u.label);
                    fit = fit_cases(s, u.cases,
                                    w == warm.end() ? std::nullopt
                                                    : std::optional<MixtureParams>(w->second));
                    if (fit->mixture) warm[u.label] = *fit->mixture;
                } catch (const FitError& e) {
                    fallback = e.what();
                }
            }
            if (!fit) {
                if (is_regional) {
                    log("lead " + std::to_string(lead) + " " + format_date(d) + ": no fit: " + fallback);
                    continue;
                }
                log("lead " + std::to_string(lead) + " " + format_date(d) + " unit " + u.label +
                    ": " + fallback + "; using regional fit");
                if (!regional_fit()) continue;
                fit = regional_fit();
            }
            Json j = fit->params;
            j["lead_h"] = lead;
            j["date"] = format_date(d);
            j["mode"] = to_string(plan.mode);
            j["unit"] = u.label;
            j["stations"] = station_list(u.stations);
            j["training_cases"] = u.cases.size();
            if (!fallback.empty()) j["fallback"] = "regional";
            write_json_file(j, s.param_dir() / param_file_name(s.cfg().model, plan.mode, lead, d,
                                                               is_regional ? "" : u.label));
            ++written;
        }
    }
    log("lead " + std::to_string(lead) + ": " + std::to_string(written) + " parameter files");
}

// ---------------------------------------------------------- parameter store

struct StoredParams {
    std::vector<StationId> stations;
    Json params;
};

class ParamStore {
public:
    explicit ParamStore(const Session& s) {
        const std::string prefix =
            to_string(s.cfg().model) + "_" + to_string(s.plan().mode) + "_";
        if (!fs::exists(s.param_dir())) return;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(s.param_dir())) {
            const auto name = e.path().filename().string();
            if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            Json j = read_json_file(f);
            const int lead = j.at("lead_h").get<int>();
            const Date d = parse_date(j.at("date").get<std::string>());
            for (const auto& st : j.at("stations")) {
                by_station_[{lead, d, StationId{st.get<std::string>()}}] = j;
            }
        }
    }

    [[nodiscard]] const Json* find(int lead, Date d, const StationId& st) const {
        const auto it = by_station_.find({lead, d, st});
        return it == by_station_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::tuple<int, Date, StationId>, Json> by_station_;
};

ProbForecast model_forecast(ModelKind model, const Json& j, const ForecastCase& fc) {
    if (model == ModelKind::Mixture) {
        double x_max = 0.0;
        const auto p = mixture_from_json(j, &x_max);
        return link(p, ensemble_stats(fc), fc.f_hres, fc.f_ctrl, x_max);
    }
    return bma_predict(bma_from_json(j), fc);
}

std::string lead_file_suffix(const Session& s) {
    return to_string(s.cfg().model) + "_" + to_string(s.plan().mode);
}

}  // namespace

std::string param_file_name(ModelKind model, SpatialMode mode, int lead_h, Date d,
                            const std::string& unit) {
    std::string name = to_string(model) + "_" + to_string(mode) + "_" + std::to_string(lead_h) +
                       "_" + format_date(d);
    if (!unit.empty()) name += "_" + unit;
    return name + ".json";
}

int cmd_fit(const RunConfig& cfg) {
    const Session s(cfg);
    fs::create_directories(s.param_dir());
    run_parallel(s.leads().size(), cfg.jobs, [&](std::size_t i) { fit_lead(s, s.leads()[i]); });
    return 0;
}

int cmd_predict(const RunConfig& cfg) {
    const Session s(cfg);
    const ParamStore store(s);
    fs::create_directories(cfg.out);
    const auto path = cfg.out / ("predictions_" + lead_file_suffix(s) + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const double level = nominal_level(raw_size(s.data()));
    out << "station,init_date,lead_h,mean,median,q_lo,q_hi,p_xmax\n";
    std::size_t missing = 0;
    for (int lead : s.leads()) {
        for (Date d : s.days()) {
            for (const auto* fc : s.index().issued(lead, d)) {
                const Json* j = store.find(lead, d, fc->station);
                if (j == nullptr || !fc->has_ensemble()) {
                    ++missing;
                    continue;
                }
                try {
                    const auto f = model_forecast(cfg.model, *j, *fc);
                    const auto iv = central_interval(f, level);
                    const double mass = std::visit(
                        [](const auto& law) -> double {
                            if constexpr (requires { law.point_mass(); }) return law.point_mass();
                            else return 0.0;
                        },
                        f);
                    out << fc->station.value << ',' << format_date(d) << ',' << lead << ','
                        << format_number(predictive_mean(f)) << ','
                        << format_number(quantile(f, 0.5)) << ',' << format_number(iv.lo) << ','
                        << format_number(iv.hi) << ',' << format_number(mass) << '\n';
                } catch (const std::exception& e) {
                    ++missing;
                    log(fc->station.value + " " + format_date(d) + " lead " + std::to_string(lead) +
                        ": " + e.what());
                }
            }
        }
    }
    if (missing > 0) log(std::to_string(missing) + " cases without a prediction");
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    const Session s(cfg);
    const ParamStore store(s);
    const ObservationHistory history(s.data());
    fs::create_directories(cfg.out);

    const std::size_t K_raw = raw_size(s.data());
    const std::size_t K_clim = cfg.climatology_size == 0 ? K_raw : cfg.climatology_size;
    const std::string model_name = to_string(cfg.model);

    std::vector<LeadInput> inputs;
    Json gaps = Json::object();
    for (int lead : s.leads()) {
        LeadInput in;
        in.lead_h = lead;
        MethodSeries model{model_name, {}, {}};
        MethodSeries raw{"raw", {}, {}};
        MethodSeries clim{"climatology", {}, {}};
        std::vector<std::string> missing_days;
        for (Date d : s.days()) {
            bool gap = false;
            for (const auto* fc : s.index().issued(lead, d)) {
                if (!fc->obs || !fc->has_ensemble()) {
                    ++in.excluded;
                    continue;
                }
                const Json* j = store.find(lead, d, fc->station);
                if (j == nullptr) {
                    gap = true;
                    ++in.excluded;
                    continue;
                }
                auto cf = climatology_forecast(history, fc->station, d, lead, K_clim,
                                               cfg.climatology_pooled);
                if (cf.members.empty()) {
                    ++in.excluded;
                    continue;
                }
                std::optional<ProbForecast> mf;
                try {
                    mf = model_forecast(cfg.model, *j, *fc);
                } catch (const DomainError& e) {
                    log(fc->station.value + " " + format_date(d) + " lead " + std::to_string(lead) +
                        ": " + e.what());
                } catch (const MissingForecastError& e) {
                    log(fc->station.value + " " + format_date(d) + " lead " + std::to_string(lead) +
                        ": " + e.what());
                }
                if (!mf) {
                    ++in.excluded;
                    continue;
                }
                const CaseKey key{fc->station, fc->valid_time(), *fc->obs};
                model.keys.push_back(key);
                model.forecasts.push_back(std::move(*mf));
                raw.keys.push_back(key);
                raw.forecasts.emplace_back(EmpiricalEnsemble(raw_members(*fc)));
                clim.keys.push_back(key);
                clim.forecasts.emplace_back(EmpiricalEnsemble(std::move(cf.members)));
            }
            if (gap) missing_days.push_back(format_date(d));
        }
        if (!missing_days.empty()) {
            log("lead " + std::to_string(lead) + ": missing parameters for " +
                std::to_string(missing_days.size()) + " days, first " + missing_days.front());
            gaps[std::to_string(lead)] = missing_days;
        }
        in.methods.push_back(std::move(model));
        in.methods.push_back(std::move(raw));
        in.methods.push_back(std::move(clim));
        inputs.push_back(std::move(in));
    }

    ReportConfig rc;
    rc.thresholds = cfg.thresholds;
    rc.crps = {cfg.mc_samples, cfg.seed};
    rc.bootstrap.replicates = cfg.bootstrap_replicates;
    rc.bootstrap.mean_block_len = cfg.block_length;
    rc.bootstrap.seed = cfg.seed;
    rc.interval_level = nominal_level(K_raw);
    const auto report = build_report(std::move(inputs), rc);

    Json j = to_json(report);
    j["missing_parameters"] = std::move(gaps);
    const auto stem = "report_" + lead_file_suffix(s);
    write_json_file(j, cfg.out / (stem + ".json"));
    std::ofstream csv(cfg.out / (stem + ".csv"));
    if (!csv) throw std::runtime_error("cannot write report CSV");
    write_report_csv(report, csv);
    return 0;
}

int cmd_cluster(const RunConfig& cfg) {
    const Session s(cfg);
    fs::create_directories(cfg.out);
    auto plan = s.plan();
    plan.mode = SpatialMode::SemiLocal;
    for (int lead : s.leads()) {
        const auto path = cfg.out / ("clusters_" + std::to_string(lead) + ".csv");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        std::optional<ClusterAssignment> previous;
        bool header = true;
        for (Date d : s.days()) {
            if (s.index().issued(lead, d).empty()) continue;
            auto a = cluster_stations(s.index(), d, lead, plan, cfg.seed,
                                      previous ? &*previous : nullptr);
            std::ostringstream rows;
            write_clusters_csv(a, rows);
            auto text = rows.str();
            if (!header) text.erase(0, text.find('\n') + 1);
            header = false;
            out << text;
            previous = std::move(a);
        }
    }
    return 0;
}

}  // namespace viscal::cli
