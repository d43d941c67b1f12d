#pragma once

#include "dke/synthgen.hpp"
#include "dke/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dke {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// [x1, y1, x2, y2, ...]
nlohmann::json to_flat(const Points& pts);
Points points_from_flat(const nlohmann::json& j);

nlohmann::json to_json(const ProbMap& m);
ProbMap prob_map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SynthScene& scene);
SynthScene scene_from_json(const nlohmann::json& j);

/// One scene per line.
void write_dataset(const std::filesystem::path& path, const std::vector<SynthScene>& scenes);
std::vector<SynthScene> read_dataset(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DeformNet& net);
DeformNet net_from_json(const nlohmann::json& j);

struct Checkpoint {
  TrainConfig config;
  TrainState state;
};

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Predictions file: one line per scene, {"scene": i, "polygons": [[x1, y1, ...], ...]}.
void write_predictions(const std::filesystem::path& path, const std::vector<std::vector<Polygon>>& preds);
std::vector<std::vector<Polygon>> read_predictions(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dke
