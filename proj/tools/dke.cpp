// dke: dataset generation, training, evaluation and visualization.
#include "dke/evaluation.hpp"
#include "dke/run_config.hpp"
#include "dke/serialization.hpp"
#include "dke/svg.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace {

using namespace dke;
namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 1 for errors, 2 when a threshold passed by flag is violated.
constexpr int kThresholdViolated = 2;

const std::set<std::string> kCommon{"seed", "n_vertices", "shrink_ratio", "loss", "iterations", "iou_threshold",
                                    "out_dir"};
const std::set<std::string> kInfer{"data", "noise", "noise_seed", "threshold", "min_area", "feature_scale"};

const std::map<std::string, std::set<std::string>> kCommandKeys{
    {"gen", {"scenes", "instances", "width", "height"}},
    {"train", {"data", "steps", "batch", "lr", "lambda", "feature_scale", "resume", "stop_at", "max_error"}},
    {"eval", {"data", "predictions", "min_f"}},
    {"infer", {"checkpoint"}},
    {"ablate", {"checkpoint_dml", "checkpoint_nnml", "checkpoint_obgml", "min_f"}},
    {"bench", {"checkpoint", "repetitions"}},
    {"viz", {"data", "checkpoint", "feature_scale", "viz_scenes"}},
};

bool takes(const std::string& command, const std::string& key) {
  if (kCommon.count(key) || kCommandKeys.at(command).count(key)) return true;
  return (command == "infer" || command == "ablate" || command == "bench") && kInfer.count(key);
}

std::string flag_name(std::string key) {
  for (char& ch : key)
    if (ch == '_') ch = '-';
  return "--" + key;
}

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  RunConfig flags;
  std::map<std::string, CLI::Option*> options;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    const json all = to_json(flags);
    json overrides = json::object();
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) overrides[key] = all.at(key);
    apply_json(cfg, overrides);
    return cfg;
  }
};

std::string require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing --") + what);
  return value;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.lr0 = c.lr;
  t.lambda = c.lambda;
  t.batch_size = c.batch;
  t.max_steps = c.steps;
  t.shrink_ratio = c.shrink_ratio;
  t.n_vertices = c.n_vertices;
  t.dce_iterations = c.iterations;
  t.loss_kind = parse_loss_kind(c.loss);
  t.seed = c.seed;
  t.feature_scale = c.feature_scale;
  return t;
}

AblationConfig ablation_config(const RunConfig& c) {
  AblationConfig a;
  a.infer.n_vertices = c.n_vertices;
  a.infer.dce_iterations = c.iterations;
  a.infer.threshold = c.threshold;
  a.infer.min_area = c.min_area;
  a.shrink_ratio = c.shrink_ratio;
  a.kernel_noise = c.noise;
  a.noise_seed = c.noise_seed;
  a.iou_threshold = c.iou_threshold;
  a.feature_scale = c.feature_scale;
  return a;
}

json report_json(const EvalReport& r) {
  json scenes = json::array();
  for (const SceneCounts& s : r.per_scene) scenes.push_back({s.matched, s.missed, s.spurious});
  return json{{"precision", r.precision},
              {"recall", r.recall},
              {"f_measure", r.f_measure},
              {"mean_iou_of_matches", r.mean_iou_of_matches},
              {"matched", r.matched()},
              {"missed", r.missed()},
              {"spurious", r.spurious()},
              {"per_scene", scenes}};
}

std::string report_text(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "P %.2f  R %.2f  F %.2f  mean IoU %.4f  (matched %d, missed %d, spurious %d)\n",
                r.precision, r.recall, r.f_measure, r.mean_iou_of_matches, r.matched(), r.missed(), r.spurious());
  return buf;
}

int gate_f(const RunConfig& c, double f) {
  if (c.min_f >= 0.0 && f < c.min_f) {
    std::fprintf(stderr, "F-measure %.2f is below --min-f %.2f\n", f, c.min_f);
    return kThresholdViolated;
  }
  return 0;
}

int cmd_gen(const RunConfig& c) {
  if (c.scenes < 1) throw ConfigError("--scenes must be >= 1");
  if (c.instances < 1) throw ConfigError("--instances must be >= 1");
  SceneConfig sc;
  sc.width = c.width;
  sc.height = c.height;
  sc.shrink_ratio = c.shrink_ratio;
  const auto scenes = make_dataset(c.scenes, c.instances, sc, c.seed);
  const fs::path path = fs::path(c.out_dir) / "dataset.jsonl";
  write_dataset(path, scenes);
  std::cout << "wrote " << scenes.size() << " scenes to " << path.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  Checkpoint ckpt;
  if (!c.resume.empty()) {
    ckpt = read_checkpoint(c.resume);
  } else {
    ckpt.config = train_config(c);
    ckpt.config.validate();
    ckpt.state = TrainState::fresh(ckpt.config);
  }
  const TrainConfig& tc = ckpt.config;
  const auto samples = build_samples(scenes, tc);
  const TrainReport report = train_steps(ckpt.state, samples, tc, c.stop_at);
  if (report.diverged) std::fprintf(stderr, "training diverged at step %d\n", ckpt.state.step);

  const fs::path dir(c.out_dir);
  write_checkpoint(dir / "checkpoint.json", ckpt);
  std::string curve;
  for (std::size_t i = 0; i < report.loss_history.size(); ++i)
    curve += json{{"step", i}, {"loss", report.loss_history[i]}}.dump() + "\n";
  write_text(dir / "loss.jsonl", curve);

  const double err = mean_boundary_error(ckpt.state.net, scenes, tc);
  char line[160];
  std::snprintf(line, sizeof line, "steps %d  final loss %.6f  mean boundary error %.4f px\n", ckpt.state.step,
                report.loss_history.empty() ? 0.0 : report.loss_history.back(), err);
  std::cout << line;
  write_text(dir / "train_report.json",
             json{{"steps", ckpt.state.step}, {"diverged", report.diverged}, {"mean_boundary_error", err}}.dump(2) +
                 "\n");
  if (report.diverged) return 1;
  if (c.max_error >= 0.0 && err > c.max_error) {
    std::fprintf(stderr, "boundary error %.4f exceeds --max-error %.4f\n", err, c.max_error);
    return kThresholdViolated;
  }
  return 0;
}

std::vector<std::vector<Polygon>> ground_truth(const std::vector<SynthScene>& scenes) {
  std::vector<std::vector<Polygon>> out;
  for (const SynthScene& s : scenes) out.push_back(s.boundaries());
  return out;
}

int write_eval(const RunConfig& c, const EvalReport& r) {
  const fs::path dir(c.out_dir);
  write_text(dir / "eval.txt", report_text(r));
  write_text(dir / "eval.json", report_json(r).dump(2) + "\n");
  std::cout << report_text(r);
  return gate_f(c, r.f_measure);
}

int cmd_eval(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  const auto preds = read_predictions(require(c.predictions, "predictions"));
  return write_eval(c, evaluate_scenes(preds, ground_truth(scenes), c.iou_threshold));
}

int cmd_infer(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  const DeformNet net = read_checkpoint(require(c.checkpoint, "checkpoint")).state.net;
  const AblationConfig a = ablation_config(c);
  std::vector<std::vector<Polygon>> preds;
  for (const SynthScene& s : scenes) {
    const ProbMap kmap = scene_kernel_map(s, a.shrink_ratio, a.kernel_noise, a.noise_seed);
    const SurrogateFeatureField field = make_feature_field(s.width, s.height, s.boundaries(), a.feature_scale);
    preds.push_back(infer(net, kmap, field, a.infer));
  }
  write_predictions(fs::path(c.out_dir) / "predictions.jsonl", preds);
  return write_eval(c, evaluate_scenes(preds, ground_truth(scenes), c.iou_threshold));
}

int cmd_ablate(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  std::map<LossKind, DeformNet> nets;
  nets.emplace(LossKind::kDml, read_checkpoint(require(c.checkpoint_dml, "checkpoint-dml")).state.net);
  nets.emplace(LossKind::kNnml, read_checkpoint(require(c.checkpoint_nnml, "checkpoint-nnml")).state.net);
  nets.emplace(LossKind::kObgml, read_checkpoint(require(c.checkpoint_obgml, "checkpoint-obgml")).state.net);
  const auto rows = run_ablation(scenes, nets, ablation_config(c));

  const std::string table = format_ablation(rows);
  std::string records;
  for (const AblationRow& r : rows) {
    json j = report_json(r.report);
    j.erase("per_scene");
    j["method"] = r.method;
    j["iterations"] = r.iterations;
    records += j.dump() + "\n";
  }
  const fs::path dir(c.out_dir);
  write_text(dir / "ablation.txt", table);
  write_text(dir / "ablation.jsonl", records);
  std::cout << table;

  const LossKind gated = parse_loss_kind(c.loss);
  for (const AblationRow& r : rows) {
    if (r.iterations == c.iterations && r.method == ablation_method_name(gated) &&
        gate_f(c, r.report.f_measure) != 0)
      return kThresholdViolated;
  }
  return 0;
}

int cmd_bench(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  const DeformNet net = read_checkpoint(require(c.checkpoint, "checkpoint")).state.net;
  const TimingReport t = benchmark(net, scenes, ablation_config(c), c.repetitions);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-12s %10s\n%-12s %10.3f\n%-12s %10.3f\n%-12s %10.3f\n%-12s %10.3f\n%-12s %10.3f\n%-12s %10.1f\n",
                "stage", "ms/scene", "kernel", t.stages.kernel_ms, "featurize", t.stages.featurize_ms, "forward",
                t.stages.forward_ms, "expand", t.stages.expand_ms, "total", t.total_ms, "scenes/s",
                t.scenes_per_second);
  std::cout << buf;
  write_text(fs::path(c.out_dir) / "bench.txt", buf);
  write_text(fs::path(c.out_dir) / "bench.json",
             json{{"scenes_per_second", t.scenes_per_second},
                  {"total_ms", t.total_ms},
                  {"kernel_ms", t.stages.kernel_ms},
                  {"featurize_ms", t.stages.featurize_ms},
                  {"forward_ms", t.stages.forward_ms},
                  {"expand_ms", t.stages.expand_ms}}
                     .dump(2) +
                 "\n");
  return 0;
}

int cmd_viz(const RunConfig& c) {
  const auto scenes = read_dataset(require(c.data, "data"));
  NetShape shape;
  DeformNet net = c.checkpoint.empty() ? DeformNet::zeros(shape) : read_checkpoint(c.checkpoint).state.net;
  const LossKind kind = parse_loss_kind(c.loss);
  const fs::path dir = fs::path(c.out_dir) / "viz";
  const std::size_t count = std::min(scenes.size(), static_cast<std::size_t>(std::max(0, c.viz_scenes)));
  for (std::size_t i = 0; i < count; ++i) {
    const SvgScene svg = visualize_scene(scenes[i], net, kind, c.n_vertices, c.iterations, c.feature_scale);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu.svg", i);
    write_text(dir / name, render_svg(svg));
  }
  std::cout << "wrote " << count << " SVG files to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable kernel expansion: synthetic text detection toolkit"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> names{
      {"gen", "generate a synthetic dataset"},
      {"train", "train the contour deformation network"},
      {"eval", "score a predictions file against the dataset"},
      {"infer", "run the full pipeline and write predictions"},
      {"ablate", "baseline vs DCE losses over 1 and 2 iterations"},
      {"bench", "single-thread inference timing"},
      {"viz", "render scenes and vertex matchings as SVG"},
  };
  std::map<std::string, Command> commands;
  for (const auto& [name, help] : names) {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    cmd.app->add_option("--config", cmd.config_path, "JSON config file; flags override it")->check(CLI::ExistingFile);
    for_each_field(cmd.flags, [&, n = name](const char* key, const char* desc, auto& field) {
      if (takes(n, key)) cmd.options[key] = cmd.app->add_option(flag_name(key), field, desc);
    });
  }

  CLI11_PARSE(app, argc, argv);

  const auto start = std::chrono::system_clock::now();
  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      const RunConfig cfg = cmd.resolve();
      parse_loss_kind(cfg.loss);
      if (cfg.n_vertices < 4) throw ConfigError("--n-vertices must be >= 4");
      if (!(cfg.shrink_ratio > 0.0 && cfg.shrink_ratio < 1.0)) throw ConfigError("--shrink-ratio must lie in (0, 1)");
      if (cfg.iterations < 1) throw ConfigError("--iterations must be >= 1");
      echo_config(cfg);
      int rc = 0;
      if (name == "gen") rc = cmd_gen(cfg);
      else if (name == "train") rc = cmd_train(cfg);
      else if (name == "eval") rc = cmd_eval(cfg);
      else if (name == "infer") rc = cmd_infer(cfg);
      else if (name == "ablate") rc = cmd_ablate(cfg);
      else if (name == "bench") rc = cmd_bench(cfg);
      else if (name == "viz") rc = cmd_viz(cfg);
      write_meta(cfg, name, start);
      return rc;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
