#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "omahgnn/trainer.hpp"

namespace omahgnn {

struct DatasetInfo {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  friend bool operator==(const DatasetInfo&, const DatasetInfo&) = default;
};

/// Everything a run leaves behind: one JSON document.
struct RunArtifact {
  nlohmann::json config;  // echoed RunConfig
  DatasetInfo dataset;
  TrainState state;
  TestAccuracy accuracy;
};

/// Little-endian IEEE-754 doubles, base64 encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text);

nlohmann::json to_json(const RunArtifact& artifact);
RunArtifact artifact_from_json(const nlohmann::json& j);

/// DataError(kUnwritable) on write failure.
void save_run_artifact(const RunArtifact& artifact, const std::filesystem::path& file);
/// DataError on a missing or malformed file.
RunArtifact load_run_artifact(const std::filesystem::path& file);

}  // namespace omahgnn
