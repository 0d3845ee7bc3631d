#ifndef PETNET_SERIALIZATION_HPP
#define PETNET_SERIALIZATION_HPP

#include "petnet/benchmark.hpp"
#include "petnet/coarsening.hpp"
#include "petnet/network.hpp"
#include "petnet/synthetic.hpp"
#include "petnet/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace petnet {

using json = nlohmann::json;

// Run configuration is one flat key/value document shared by every command.
// Missing keys take defaults; unknown keys are rejected.

/// Every known key with its default value.
json default_config();
/// Defaults overlaid with `overrides`; throws Config on unknown keys or bad types.
json resolve_config(const json& overrides);

NetworkConfig network_config(const json& resolved);
TrainConfig train_config(const json& resolved);
CrossValidationConfig cv_config(const json& resolved);
SyntheticSpec synthetic_spec(const json& resolved);
BenchmarkConfig benchmark_config(const json& resolved);

json to_json(const NetworkConfig& cfg);
json to_json(const SparseGraph& g);
SparseGraph graph_from_json(const json& j);
json to_json(const CoarseningHierarchy& h);
CoarseningHierarchy hierarchy_from_json(const json& j);
json to_json(const ExperimentReport& report, const std::vector<std::string>& subject_ids);

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

struct ModelFile {
  ChebNetModel model;
  std::vector<std::string> class_names;
};

json model_to_json(const ChebNetModel& m, const std::vector<std::string>& class_names);
ModelFile model_from_json(const json& j);

void save_model(const ModelFile& f, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

}  // namespace petnet

#endif
