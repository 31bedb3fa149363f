#pragma once

#include "config.hpp"

#include <viscal/data_io.hpp>

#include <filesystem>
#include <string>

namespace viscal::cli {

/// `{model}_{mode}_{lead}_{date}[_{unit}].json`; regional fits carry no unit.
[[nodiscard]] std::string param_file_name(ModelKind model, SpatialMode mode, int lead_h, Date d,
                                          const std::string& unit);

/// Each command returns a process exit code and writes below cfg.out.
int cmd_fit(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_cluster(const RunConfig& cfg);

}  // namespace viscal::cli
