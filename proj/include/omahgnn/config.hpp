#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "omahgnn/dataset.hpp"
#include "omahgnn/trainer.hpp"

namespace omahgnn {

/// Either a dataset directory or a synthetic spec generated from the run seed.
struct DatasetSource {
  std::optional<std::filesystem::path> path;
  SyntheticSpec synthetic;

  bool is_synthetic() const noexcept { return !path.has_value(); }
};

struct RunConfig {
  DatasetSource dataset;
  TrainConfig train;
  std::filesystem::path output = "run.json";
};

/// Every field of `j` is checked before anything runs. Unknown keys, wrong types
/// and out-of-range values throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& file);

/// Complete echo: every default is written out, so the result reparses to the same config.
nlohmann::json to_json(const RunConfig& config);

SyntheticSpec parse_synthetic(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);

/// Loads from disk or generates, per the source.
Dataset materialize(const DatasetSource& source, std::uint64_t seed);

}  // namespace omahgnn
