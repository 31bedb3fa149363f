#pragma once

#include <viscal/training.hpp>
#include <viscal/verification.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace viscal::cli {

enum class ModelKind { Mixture, Bma };

[[nodiscard]] std::string to_string(ModelKind m);
[[nodiscard]] ModelKind parse_model(const std::string& s);

struct RunConfig {
    std::filesystem::path data;
    double x_max = 75.0;
    ModelKind model = ModelKind::Mixture;
    TrainingPlan plan{};
    bool window_set = false;  // otherwise 350 days for the mixture, 25 for BMA

    std::optional<Date> verify_start;
    std::optional<Date> verify_end;
    std::vector<int> leads;  ///< empty: every lead in the data

    std::size_t climatology_size = 0;  ///< 0: size of the raw ensemble
    bool climatology_pooled = false;

    std::vector<double> thresholds{1.0, 3.0, 5.0, 10.0};
    std::size_t mc_samples = kDefaultMcSamples;
    std::size_t bootstrap_replicates = 2000;
    double block_length = 0.0;  ///< 0: ceil(n^(1/3))
    std::uint64_t seed = kDefaultSeed;
    unsigned jobs = 0;  ///< 0: hardware concurrency

    std::filesystem::path out = "out";

    [[nodiscard]] int window_days() const;
    /// Throws ParameterError for inconsistent settings.
    void validate() const;
};

/// Reads a JSON config; relative data/out paths resolve against the file's directory.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

}  // namespace viscal::cli
