#pragma once

#include "viscal/bma_model.hpp"
#include "viscal/mixture_model.hpp"
#include "viscal/training.hpp"
#include "viscal/verification.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace viscal {

using Json = nlohmann::ordered_json;

[[nodiscard]] Json to_json(const MixtureParams& p, double x_max);
/// Returns the parameters and sets x_max. Throws ParseError on bad layout.
[[nodiscard]] MixtureParams mixture_from_json(const Json& j, double* x_max = nullptr);

[[nodiscard]] Json to_json(const BmaParams& p);
[[nodiscard]] BmaParams bma_from_json(const Json& j);

[[nodiscard]] Json to_json(const VerificationReport& r);

/// One row per metric: lead_h,method,metric,value,ci_lo,ci_hi.
void write_report_csv(const VerificationReport& r, std::ostream& out);

/// station,cluster rows of one day's assignment.
void write_clusters_csv(const ClusterAssignment& a, std::ostream& out);

[[nodiscard]] Json read_json_file(const std::filesystem::path& path);
/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace viscal
