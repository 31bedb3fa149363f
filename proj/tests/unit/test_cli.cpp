#include <doctest.h>

#include "../tools/src/commands.hpp"
#include "../tools/src/config.hpp"

#include "viscal/errors.hpp"
#include "viscal/serialization.hpp"
#include "support/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace viscal;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    fs::create_directories(root);
    return root;
}

/// Two stations, 45 days, lead 24, HRES + CTRL + ENS.
fs::path small_archive(const fs::path& root) {
    Dataset data;
    data.x_max = 75.0;
    data.has_hres = true;
    data.has_ctrl = true;
    data.cases = testing::simulate_bma_cases(2 * 45, 31, 75.0, true, true, 2);
    data.stations = {{testing::station_name(0)}, {testing::station_name(1)}};
    // one case without observation, one without members
    data.cases[60].obs.reset();
    data.cases[61].f_ens.clear();
    write_dataset(data, root / "data.csv");
    return root / "data.csv";
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

}  // namespace

TEST_CASE("config") {
    const auto root = fresh_dir("viscal_cli_config");
    write_json_file(Json{{"data", "d.csv"},
                         {"model", "bma"},
                         {"training", {{"mode", "semilocal"}, {"clusters", 4}}},
                         {"verification", {{"start", "2021-02-01"}, {"leads", {24, 48}}, {"bootstrap", 100}}}},
                    root / "c.json");
    auto c = cli::load_config(root / "c.json");
    CHECK(c.data == root / "d.csv");
    CHECK(c.model == cli::ModelKind::Bma);
    CHECK(c.window_days() == 25);
    CHECK(c.plan.mode == SpatialMode::SemiLocal);
    CHECK(c.plan.clusters == 4);
    CHECK(c.leads == std::vector<int>{24, 48});
    CHECK(c.bootstrap_replicates == 100);
    CHECK(format_date(*c.verify_start) == "2021-02-01");

    cli::RunConfig m;
    CHECK(m.window_days() == 350);
    CHECK(m.bootstrap_replicates == 2000);

    CHECK(cli::param_file_name(cli::ModelKind::Mixture, SpatialMode::Local, 24,
                               parse_date("2021-02-03"), "S01") == "mixture_local_24_2021-02-03_S01.json");
    CHECK(cli::param_file_name(cli::ModelKind::Bma, SpatialMode::Regional, 6, parse_date("2021-02-03"), "") ==
          "bma_regional_6_2021-02-03.json");

    write_json_file(Json{{"model", "neural"}}, root / "bad.json");
    CHECK_THROWS((void)cli::load_config(root / "bad.json"));
    std::ofstream(root / "broken.json") << "{ not json";
    CHECK_THROWS_AS((void)cli::load_config(root / "broken.json"), ParseError);
}

TEST_CASE("fit, predict, verify, cluster") {
    const auto root = fresh_dir("viscal_cli_run");
    small_archive(root);
    write_json_file(Json{{"data", "data.csv"},
                         {"out", "out"},
                         {"model", "bma"},
                         {"seed", 5},
                         {"jobs", 1},
                         {"training", {{"window", 10}, {"min_cases", 10}}},
                         {"verification", {{"bootstrap", 200}, {"mc_samples", 1000}}}},
                    root / "config.json");
    auto cfg = cli::load_config(root / "config.json");

    REQUIRE(cli::cmd_fit(cfg) == 0);
    const auto params = cfg.out / "params";
    REQUIRE(fs::exists(params));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(params)) {
        ++files;
        const auto j = read_json_file(e.path());
        CHECK(j.contains("c0"));
        CHECK(j.contains("training_cases"));
    }
    // default verification start: first day + window + lead days
    CHECK(files == 45 - 11);
    CHECK(fs::exists(params / "bma_regional_24_2000-01-12.json"));
    CHECK_FALSE(fs::exists(params / "bma_regional_24_2000-01-11.json"));

    REQUIRE(cli::cmd_predict(cfg) == 0);
    const auto pred = cfg.out / "predictions_bma_regional.csv";
    REQUIRE(fs::exists(pred));
    CHECK(count_lines(pred) > 2 * 30);

    REQUIRE(cli::cmd_verify(cfg) == 0);
    const auto rep = read_json_file(cfg.out / "report_bma_regional.json");
    const auto& lead = rep.at("leads").at(0);
    CHECK(lead.at("lead_h") == 24);
    CHECK(lead.at("excluded").get<int>() >= 1);
    const auto& methods = lead.at("methods");
    CHECK(methods.contains("bma"));
    CHECK(methods.contains("raw"));
    CHECK(methods.contains("climatology"));
    CHECK(methods.at("bma").at("metrics").contains("logs"));
    CHECK_FALSE(methods.at("raw").at("metrics").contains("logs"));
    CHECK(methods.at("climatology").at("metrics").at("crpss").at("value") == 0.0);
    CHECK(rep.at("crps_pct_of_baseline").at("raw") == 100.0);
    CHECK(rep.contains("missing_parameters"));
    CHECK(fs::exists(cfg.out / "report_bma_regional.csv"));

    cfg.plan.clusters = 2;
    REQUIRE(cli::cmd_cluster(cfg) == 0);
    const auto clusters = cfg.out / "clusters_24.csv";
    REQUIRE(fs::exists(clusters));
    std::ifstream in(clusters);
    std::string header;
    std::getline(in, header);
    CHECK(header == "date,station,cluster");
}

TEST_CASE("verify without fitted parameters") {
    const auto root = fresh_dir("viscal_cli_empty");
    small_archive(root);
    cli::RunConfig cfg;
    cfg.data = root / "data.csv";
    cfg.out = root / "out";
    cfg.model = cli::ModelKind::Bma;
    cfg.plan.window_days = 10;
    cfg.window_set = true;
    cfg.bootstrap_replicates = 100;
    CHECK(cli::cmd_verify(cfg) == 0);
    const auto rep = read_json_file(cfg.out / "report_bma_regional.json");
    CHECK(rep.at("missing_parameters").size() > 0);
}
