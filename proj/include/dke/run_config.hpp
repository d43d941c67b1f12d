#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace dke {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Settings for every subcommand. A config file may set any subset of keys;
/// flags override the file. Negative thresholds mean "not set".
struct RunConfig {
  std::uint64_t seed = 1;
  int n_vertices = 128;
  double shrink_ratio = 0.4;
  std::string loss = "obgml";
  int iterations = 1;
  double iou_threshold = 0.5;
  std::string out_dir = "out";

  int scenes = 200;
  int instances = 3;
  int width = 256;
  int height = 256;

  std::string data;
  int steps = 2000;
  int batch = 8;
  double lr = 2e-4;
  double lambda = 0.25;
  double feature_scale = 24.0;
  std::string resume;
  int stop_at = -1;

  std::string checkpoint;
  std::string checkpoint_dml;
  std::string checkpoint_nnml;
  std::string checkpoint_obgml;
  std::string predictions;
  double noise = 2.0;
  std::uint64_t noise_seed = 11;
  double threshold = 0.5;
  double min_area = 4.0;
  int repetitions = 5;
  int viz_scenes = 4;

  double min_f = -1.0;
  double max_error = -1.0;
};

/// Visits (key, description, field) in a fixed order.
template <typename Self, typename F>
void for_each_field(Self& c, F&& f) {
  f("seed", "random seed", c.seed);
  f("n_vertices", "contour vertex count N", c.n_vertices);
  f("shrink_ratio", "kernel shrink ratio r", c.shrink_ratio);
  f("loss", "contour loss: dml, nnml or obgml", c.loss);
  f("iterations", "DCE iterations", c.iterations);
  f("iou_threshold", "IoU needed for a match", c.iou_threshold);
  f("out_dir", "output directory", c.out_dir);
  f("scenes", "number of scenes to generate", c.scenes);
  f("instances", "text instances per scene", c.instances);
  f("width", "canvas width", c.width);
  f("height", "canvas height", c.height);
  f("data", "dataset file (JSONL)", c.data);
  f("steps", "training steps", c.steps);
  f("batch", "training batch size", c.batch);
  f("lr", "initial learning rate", c.lr);
  f("lambda", "regression loss weight", c.lambda);
  f("feature_scale", "feature field ramp width in px", c.feature_scale);
  f("resume", "checkpoint to resume training from", c.resume);
  f("stop_at", "pause training at this step (-1: run to the end)", c.stop_at);
  f("checkpoint", "model checkpoint", c.checkpoint);
  f("checkpoint_dml", "checkpoint trained with DML", c.checkpoint_dml);
  f("checkpoint_nnml", "checkpoint trained with NNML", c.checkpoint_nnml);
  f("checkpoint_obgml", "checkpoint trained with OBGML", c.checkpoint_obgml);
  f("predictions", "predictions file (JSONL)", c.predictions);
  f("noise", "kernel map noise in px", c.noise);
  f("noise_seed", "seed of the kernel map noise", c.noise_seed);
  f("threshold", "kernel map binarization threshold", c.threshold);
  f("min_area", "smallest kernel kept, px^2", c.min_area);
  f("repetitions", "timed benchmark passes", c.repetitions);
  f("viz_scenes", "scenes to render", c.viz_scenes);
  f("min_f", "fail when F-measure is below this", c.min_f);
  f("max_error", "fail when boundary error exceeds this", c.max_error);
}

nlohmann::json to_json(const RunConfig& c);
/// Starts from defaults; throws ConfigError on unknown keys or wrong types.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Copies every key present in `j` onto `c`.
void apply_json(RunConfig& c, const nlohmann::json& j);

/// Writes out_dir/config.json with the fully-resolved config.
void echo_config(const RunConfig& c);

/// Timestamps and wall time go here, away from the deterministic artifacts.
void write_meta(const RunConfig& c, const std::string& command, std::chrono::system_clock::time_point start);

}  // namespace dke
