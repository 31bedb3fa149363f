#include "viscal/training.hpp"

#include "viscal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace viscal {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

// Type-7 quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct LloydRun {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;
    double wcss = 0.0;
};

LloydRun lloyd(const std::vector<std::vector<double>>& pts, int k, std::mt19937_64& rng) {
    const std::size_t n = pts.size();
    const auto kk = static_cast<std::size_t>(k);
    std::vector<std::vector<double>> centroids;
    centroids.reserve(kk);

    // k-means++ seeding: first centre uniform, the rest with probability
    // proportional to the squared distance to the nearest chosen centre.
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<bool> chosen(n, false);
    std::size_t first = pick(rng);
    centroids.push_back(pts[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    while (centroids.size() < kk) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(pts[i], c));
            d2[i] = chosen[i] ? 0.0 : best;
            total += d2[i];
        }
        std::size_t next = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (next = 0; next + 1 < n; ++next) {
                if (d2[next] > 0.0 && target < d2[next]) break;
                target -= d2[next];
            }
            while (chosen[next]) next = (next + 1) % n;
        } else {
            // all remaining points coincide with a centre
            while (chosen[next]) ++next;
        }
        chosen[next] = true;
        centroids.push_back(pts[next]);
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(pts[i], centroids[0]);
            for (std::size_t c = 1; c < kk; ++c) {
                const double d = sq_dist(pts[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        // update, re-seeding empty clusters at the point farthest from its centre
        std::vector<std::size_t> counts(kk, 0);
        std::vector<std::vector<double>> sums(kk, std::vector<double>(pts[0].size(), 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            ++counts[c];
            for (std::size_t j = 0; j < pts[i].size(); ++j) sums[c][j] += pts[i][j];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] > 0) {
                for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
                centroids[c] = std::move(sums[c]);
                continue;
            }
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = sq_dist(pts[i], centroids[static_cast<std::size_t>(labels[i])]);
                if (d > far_d && counts[static_cast<std::size_t>(labels[i])] > 1) {
                    far_d = d;
                    far = i;
                }
            }
            --counts[static_cast<std::size_t>(labels[far])];
            labels[far] = static_cast<int>(c);
            counts[c] = 1;
            centroids[c] = pts[far];
            changed = true;
        }
        if (!changed) break;
    }

    LloydRun run;
    run.wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        run.wcss += sq_dist(pts[i], centroids[static_cast<std::size_t>(labels[i])]);
    }
    run.labels = std::move(labels);
    run.centroids = std::move(centroids);
    return run;
}

}  // namespace

std::string to_string(SpatialMode mode) {
    switch (mode) {
        case SpatialMode::Regional: return "regional";
        case SpatialMode::Local: return "local";
        case SpatialMode::SemiLocal: return "semilocal";
    }
    return "?";
}

SpatialMode parse_spatial_mode(const std::string& s) {
    if (s == "regional") return SpatialMode::Regional;
    if (s == "local") return SpatialMode::Local;
    if (s == "semilocal" || s == "semi-local") return SpatialMode::SemiLocal;
    throw ParameterError("unknown spatial mode '" + s + "'");
}

void TrainingPlan::validate() const {
    if (window_days < 1) throw ParameterError("training plan: window must be at least one day");
    if (mode == SpatialMode::SemiLocal && clusters < 1) {
        throw ParameterError("training plan: cluster count must be at least one");
    }
    if (feature_quantile_count < 1) {
        throw ParameterError("training plan: feature quantile count must be positive");
    }
}

int lead_days(int lead_h) {
    if (lead_h < 0) throw DomainError("lead time must be non-negative");
    return (lead_h + 23) / 24;
}

DateInterval rolling_window(Date d, int lead_h, int window_days) {
    if (window_days < 1) throw ParameterError("rolling_window: n must be at least 1");
    const std::chrono::days ell{lead_days(lead_h)};
    const Date last = d - ell;
    return {last - std::chrono::days(window_days - 1), last};
}

// -------------------------------------------------------------- index

CaseIndex::CaseIndex(const Dataset& data) : data_(&data) {
    for (std::size_t i = 0; i < data.cases.size(); ++i) {
        by_lead_[data.cases[i].lead_h].push_back(i);
    }
    for (auto& [lead, idx] : by_lead_) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const auto& ca = data.cases[a];
            const auto& cb = data.cases[b];
            if (ca.init_date != cb.init_date) return ca.init_date < cb.init_date;
            return ca.station < cb.station;
        });
    }
}

bool CaseIndex::usable(const ForecastCase& fc) const {
    if (!fc.obs || !fc.has_ensemble()) return false;
    if (data_->has_hres && !fc.f_hres) return false;
    if (data_->has_ctrl && !fc.f_ctrl) return false;
    return true;
}

std::vector<const ForecastCase*> CaseIndex::window(int lead_h, DateInterval window,
                                                   bool usable_only) const {
    std::vector<const ForecastCase*> out;
    const auto it = by_lead_.find(lead_h);
    if (it == by_lead_.end()) return out;
    // same lead, so valid-date order equals init-date order
    const auto& idx = it->second;
    const auto lo = std::partition_point(idx.begin(), idx.end(), [&](std::size_t i) {
        return data_->cases[i].valid_date() < window.first;
    });
    for (auto p = lo; p != idx.end(); ++p) {
        const auto& fc = data_->cases[*p];
        if (fc.valid_date() > window.last) break;
        if (usable_only && !usable(fc)) continue;
        out.push_back(&fc);
    }
    return out;
}

std::vector<const ForecastCase*> CaseIndex::issued(int lead_h, Date init_date) const {
    std::vector<const ForecastCase*> out;
    const auto it = by_lead_.find(lead_h);
    if (it == by_lead_.end()) return out;
    const auto& idx = it->second;
    const auto lo = std::partition_point(idx.begin(), idx.end(), [&](std::size_t i) {
        return data_->cases[i].init_date < init_date;
    });
    for (auto p = lo; p != idx.end() && data_->cases[*p].init_date == init_date; ++p) {
        out.push_back(&data_->cases[*p]);
    }
    return out;
}

// ----------------------------------------------------------- features

std::vector<double> raw_station_features(std::span<const double> obs,
                                         std::span<const double> errors, int quantile_count) {
    if (obs.empty() || errors.empty()) {
        throw DomainError("station features: no data");
    }
    std::vector<double> so(obs.begin(), obs.end());
    std::vector<double> se(errors.begin(), errors.end());
    std::sort(so.begin(), so.end());
    std::sort(se.begin(), se.end());
    std::vector<double> out;
    out.reserve(2 * static_cast<std::size_t>(quantile_count));
    for (const auto* block : {&so, &se}) {
        for (int i = 1; i <= quantile_count; ++i) {
            out.push_back(sorted_quantile(*block, (i - 0.5) / quantile_count));
        }
    }
    return out;
}

StationFeatures station_features(std::span<const ForecastCase* const> window_cases,
                                 std::span<const StationId> stations, int quantile_count) {
    std::map<StationId, std::pair<std::vector<double>, std::vector<double>>> per_station;
    for (const auto* fc : window_cases) {
        if (!fc->obs || !fc->has_ensemble()) continue;
        auto& [obs, err] = per_station[fc->station];
        obs.push_back(*fc->obs);
        err.push_back(ensemble_stats(*fc).mean_ens - *fc->obs);
    }
    StationFeatures out;
    for (const auto& s : stations) {
        const auto it = per_station.find(s);
        if (it == per_station.end() ||
            it->second.first.size() < static_cast<std::size_t>(quantile_count)) {
            out.insufficient.push_back(s);
            continue;
        }
        out.stations.push_back(s);
        out.features.push_back(
            raw_station_features(it->second.first, it->second.second, quantile_count));
    }
    if (out.features.empty()) return out;
    const std::size_t dim = out.features.front().size();
    const auto n = static_cast<double>(out.features.size());
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (const auto& f : out.features) mean += f[j];
        mean /= n;
        double var = 0.0;
        for (const auto& f : out.features) var += (f[j] - mean) * (f[j] - mean);
        const double sd = std::sqrt(var / n);
        for (auto& f : out.features) f[j] = sd > 0.0 ? (f[j] - mean) / sd : 0.0;
    }
    return out;
}

// ------------------------------------------------------------- k-means

KMeansResult kmeans_cluster(const std::vector<std::vector<double>>& points, int k,
                            std::uint64_t seed, int restarts) {
    if (k < 1) throw ParameterError("kmeans: k must be at least 1");
    if (points.size() < static_cast<std::size_t>(k)) {
        throw ParameterError("kmeans: fewer points than clusters");
    }
    std::mt19937_64 rng(seed);
    std::optional<LloydRun> best;
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        auto run = lloyd(points, k, rng);
        if (!best || run.wcss < best->wcss) best = std::move(run);
    }
    // relabel by first appearance so equal partitions get equal labels
    std::vector<int> relabel(static_cast<std::size_t>(k), -1);
    int next = 0;
    KMeansResult out;
    out.wcss = best->wcss;
    out.labels.reserve(points.size());
    for (int label : best->labels) {
        auto& r = relabel[static_cast<std::size_t>(label)];
        if (r < 0) r = next++;
        out.labels.push_back(r);
    }
    out.centroids.resize(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < relabel.size(); ++c) {
        if (relabel[c] >= 0) out.centroids[static_cast<std::size_t>(relabel[c])] = best->centroids[c];
    }
    return out;
}

ClusterAssignment cluster_stations(const CaseIndex& index, Date d, int lead_h,
                                   const TrainingPlan& plan, std::uint64_t seed,
                                   const ClusterAssignment* previous) {
    plan.validate();
    const auto& stations = index.dataset().stations;
    const int k = std::max(plan.clusters, 1);
    if (static_cast<std::size_t>(k) > stations.size()) {
        throw ParameterError("cluster_stations: more clusters than stations");
    }
    const auto window = index.window(lead_h, rolling_window(d, lead_h, plan.window_days));
    const auto feats = station_features(window, stations, plan.feature_quantile_count);

    ClusterAssignment out;
    out.valid_for_day = d;
    const bool can_cluster = feats.stations.size() >= static_cast<std::size_t>(k);
    if (!can_cluster || (!feats.insufficient.empty() && previous == nullptr)) {
        out.clusters = 1;
        out.regional_fallback = true;
        for (const auto& s : stations) out.cluster[s] = 0;
        return out;
    }
    const auto km = kmeans_cluster(feats.features, k, seed);
    out.clusters = k;
    for (std::size_t i = 0; i < feats.stations.size(); ++i) {
        out.cluster[feats.stations[i]] = km.labels[i];
    }
    for (const auto& s : feats.insufficient) {
        // majority cluster of the stations that shared its previous cluster
        std::map<int, int> votes;
        const auto prev = previous->cluster.find(s);
        if (prev != previous->cluster.end()) {
            for (const auto& [other, c] : previous->cluster) {
                if (other == s || c != prev->second) continue;
                const auto now = out.cluster.find(other);
                if (now != out.cluster.end() &&
                    std::find(feats.stations.begin(), feats.stations.end(), other) !=
                        feats.stations.end()) {
                    ++votes[now->second];
                }
            }
        }
        int best = 0;
        int best_votes = -1;
        for (const auto& [c, v] : votes) {
            if (v > best_votes) {
                best = c;
                best_votes = v;
            }
        }
        out.cluster[s] = best;
    }
    return out;
}

// ------------------------------------------------------------ assemble

std::vector<FitUnit> assemble(const CaseIndex& index, Date d, int lead_h, const TrainingPlan& plan,
                              const ClusterAssignment* assignment) {
    plan.validate();
    const auto window = index.window(lead_h, rolling_window(d, lead_h, plan.window_days));
    const auto& stations = index.dataset().stations;
    std::vector<FitUnit> units;

    switch (plan.mode) {
        case SpatialMode::Regional: {
            FitUnit u;
            u.label = "regional";
            u.stations = stations;
            for (const auto* fc : window) u.cases.push_back(*fc);
            units.push_back(std::move(u));
            break;
        }
        case SpatialMode::Local: {
            std::map<StationId, std::size_t> pos;
            for (const auto& s : stations) {
                pos[s] = units.size();
                units.push_back(FitUnit{s.value, {s}, {}, false});
            }
            for (const auto* fc : window) units[pos.at(fc->station)].cases.push_back(*fc);
            break;
        }
        case SpatialMode::SemiLocal: {
            if (assignment == nullptr) {
                throw ParameterError("assemble: semi-local training needs a cluster assignment");
            }
            units.resize(static_cast<std::size_t>(assignment->clusters));
            for (std::size_t c = 0; c < units.size(); ++c) units[c].label = "c" + std::to_string(c);
            for (const auto& s : stations) {
                const auto it = assignment->cluster.find(s);
                if (it == assignment->cluster.end()) {
                    throw ParameterError("assemble: station " + s.value + " has no cluster");
                }
                units[static_cast<std::size_t>(it->second)].stations.push_back(s);
            }
            for (const auto* fc : window) {
                units[static_cast<std::size_t>(assignment->cluster.at(fc->station))].cases.push_back(*fc);
            }
            break;
        }
    }
    for (auto& u : units) u.below_minimum = u.cases.size() < plan.min_cases;
    return units;
}

}  // namespace viscal
