#include "viscal/data_io.hpp"

#include "viscal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace viscal {

namespace {

using namespace std::chrono;

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string ens_column(std::size_t i) {
    std::string name = "f_ens_";
    if (i + 1 < 10) name += '0';
    name += std::to_string(i + 1);
    return name;
}

struct Columns {
    std::size_t station = 0;
    std::size_t init_date = 0;
    std::size_t lead_h = 0;
    std::size_t obs = 0;
    std::optional<std::size_t> hres;
    std::optional<std::size_t> ctrl;
    std::vector<std::size_t> ens;
    std::size_t count = 0;
};

Columns parse_header(std::string_view line) {
    std::map<std::string, std::size_t, std::less<>> index;
    const auto fields = split_fields(line);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto name = std::string(trim(fields[i]));
        if (!index.emplace(name, i).second) {
            throw SchemaError(1, "duplicate column '" + name + "'");
        }
    }
    auto required = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end()) throw SchemaError(1, "missing column '" + name + "'");
        return it->second;
    };
    auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = index.find(name);
        if (it == index.end()) return std::nullopt;
        return it->second;
    };
    Columns cols;
    cols.station = required("station");
    cols.init_date = required("init_date");
    cols.lead_h = required("lead_h");
    cols.obs = required("obs");
    cols.hres = optional_col("f_hres");
    cols.ctrl = optional_col("f_ctrl");
    for (std::size_t i = 0; i < kEnsembleSize; ++i) {
        cols.ens.push_back(required(ens_column(i)));
    }
    cols.count = fields.size();
    return cols;
}

std::optional<double> parse_value(std::string_view text, std::size_t line, double x_max,
                                  std::size_t& clamped) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw ParseError(line, "invalid number '" + std::string(text) + "'");
    }
    if (value < 0.0) {
        throw ParseError(line, "negative visibility '" + std::string(text) + "'");
    }
    if (value > x_max) {
        ++clamped;
        value = x_max;
    }
    return value;
}

}  // namespace

DateTime valid_time(Date init_date, int lead_h) {
    return DateTime(init_date) + hours(lead_h);
}

DateTime ForecastCase::valid_time() const { return viscal::valid_time(init_date, lead_h); }

Date ForecastCase::valid_date() const { return floor<days>(valid_time()); }

int day_of_year(Date date) {
    const year_month_day ymd{date};
    const Date jan1 = ymd.year() / January / 1;
    return static_cast<int>((date - jan1).count()) + 1;
}

Date parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const auto t = trim(text);
    if (t.size() != 10 || t[4] != '-' || t[7] != '-') {
        throw DomainError("malformed date '" + text + "'");
    }
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto [ptr, ec] = std::from_chars(t.data() + pos, t.data() + pos + len, out);
        if (ec != std::errc{} || ptr != t.data() + pos + len) {
            throw DomainError("malformed date '" + text + "'");
        }
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw DomainError("invalid calendar date '" + text + "'");
    return Date(ymd);
}

std::string format_date(Date date) {
    const year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_number(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::vector<int> Dataset::lead_times() const {
    std::set<int> leads;
    for (const auto& c : cases) leads.insert(c.lead_h);
    return {leads.begin(), leads.end()};
}

EnsembleStats ensemble_stats(const ForecastCase& fc) {
    if (fc.f_ens.empty()) {
        throw MissingForecastError("ensemble_stats: ensemble members are missing");
    }
    // Sorting first makes the summation order, and hence the result,
    // independent of member order.
    std::vector<double> members = fc.f_ens;
    std::sort(members.begin(), members.end());
    const auto n = static_cast<double>(members.size());
    const double mean = std::accumulate(members.begin(), members.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : members) ss += (v - mean) * (v - mean);
    EnsembleStats stats;
    stats.mean_ens = mean;
    stats.sd_ens = members.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    stats.day_of_year = day_of_year(fc.valid_date());
    return stats;
}

Dataset read_dataset(std::istream& in, double x_max) {
    if (!(x_max > 0.0) || !std::isfinite(x_max)) {
        throw ParameterError("load_dataset: x_max must be positive");
    }
    Dataset data;
    data.x_max = x_max;
    std::string line;
    if (!std::getline(in, line)) {
        return data;
    }
    const Columns cols = parse_header(line);
    data.has_hres = cols.hres.has_value();
    data.has_ctrl = cols.ctrl.has_value();

    std::set<std::tuple<std::string, Date, int>> keys;
    std::set<StationId> stations;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != cols.count) {
            throw ParseError(line_no, "expected " + std::to_string(cols.count) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        ForecastCase fc;
        fc.x_max = x_max;
        fc.station.value = std::string(trim(fields[cols.station]));
        if (fc.station.value.empty()) throw ParseError(line_no, "empty station id");
        try {
            fc.init_date = parse_date(std::string(fields[cols.init_date]));
        } catch (const DomainError& e) {
            throw ParseError(line_no, e.what());
        }
        const auto lead_text = trim(fields[cols.lead_h]);
        const auto [ptr, ec] =
            std::from_chars(lead_text.data(), lead_text.data() + lead_text.size(), fc.lead_h);
        if (ec != std::errc{} || ptr != lead_text.data() + lead_text.size()) {
            throw ParseError(line_no, "invalid lead time '" + std::string(lead_text) + "'");
        }
        if (fc.lead_h < 6 || fc.lead_h % 6 != 0) {
            throw SchemaError(line_no, "lead time must be a positive multiple of 6 h");
        }
        fc.obs = parse_value(fields[cols.obs], line_no, x_max, data.clamped_values);
        if (cols.hres) fc.f_hres = parse_value(fields[*cols.hres], line_no, x_max, data.clamped_values);
        if (cols.ctrl) fc.f_ctrl = parse_value(fields[*cols.ctrl], line_no, x_max, data.clamped_values);
        std::size_t present = 0;
        std::vector<double> members(kEnsembleSize, 0.0);
        for (std::size_t i = 0; i < kEnsembleSize; ++i) {
            if (auto v = parse_value(fields[cols.ens[i]], line_no, x_max, data.clamped_values)) {
                members[i] = *v;
                ++present;
            }
        }
        if (present == kEnsembleSize) {
            fc.f_ens = std::move(members);
        } else if (present != 0) {
            throw SchemaError(line_no, "ensemble has " + std::to_string(present) +
                                           " of 50 members; expected all or none");
        }
        if (!keys.emplace(fc.station.value, fc.init_date, fc.lead_h).second) {
            throw SchemaError(line_no, "duplicate (station, init_date, lead_h) key");
        }
        stations.insert(fc.station);
        data.cases.push_back(std::move(fc));
    }
    data.stations.assign(stations.begin(), stations.end());
    return data;
}

Dataset load_dataset(const std::filesystem::path& path, double x_max) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    }
    return read_dataset(in, x_max);
}

void write_dataset(const Dataset& data, std::ostream& out) {
    out << "station,init_date,lead_h,obs";
    if (data.has_hres) out << ",f_hres";
    if (data.has_ctrl) out << ",f_ctrl";
    for (std::size_t i = 0; i < kEnsembleSize; ++i) out << ',' << ens_column(i);
    out << '\n';
    auto cell = [&](const std::optional<double>& v) {
        out << ',';
        if (v) out << format_number(*v);
    };
    for (const auto& c : data.cases) {
        out << c.station.value << ',' << format_date(c.init_date) << ',' << c.lead_h;
        cell(c.obs);
        if (data.has_hres) cell(c.f_hres);
        if (data.has_ctrl) cell(c.f_ctrl);
        for (std::size_t i = 0; i < kEnsembleSize; ++i) {
            out << ',';
            if (c.has_ensemble()) out << format_number(c.f_ens[i]);
        }
        out << '\n';
    }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write dataset '" + path.string() + "'");
    }
    write_dataset(data, out);
}

}  // namespace viscal
