#include "dke/serialization.hpp"

#include <fstream>
#include <sstream>

namespace dke {

using nlohmann::json;

namespace {

void check_version(const json& j, int expected, const char* what) {
  if (!j.contains("format_version")) throw FormatError(std::string(what) + ": missing format_version");
  const int v = j.at("format_version").get<int>();
  if (v != expected) throw FormatError(std::string(what) + ": unsupported format_version " + std::to_string(v));
}

template <typename M>
json matrix_to_json(const M& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

template <typename M>
M matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("matrix payload size mismatch");
  M m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) m.data()[k] = data[static_cast<std::size_t>(k)];
  return m;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

}  // namespace

json to_flat(const Points& pts) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    arr.push_back(pts(i, 0));
    arr.push_back(pts(i, 1));
  }
  return arr;
}

Points points_from_flat(const json& j) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() % 2 != 0) throw FormatError("coordinate array has odd length");
  Points pts(static_cast<Eigen::Index>(flat.size() / 2), 2);
  for (std::size_t k = 0; k < flat.size() / 2; ++k) {
    pts(static_cast<Eigen::Index>(k), 0) = flat[2 * k];
    pts(static_cast<Eigen::Index>(k), 1) = flat[2 * k + 1];
  }
  return pts;
}

json to_json(const ProbMap& m) {
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(m.values.size()));
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) data.push_back(m.values(r, c));
  return json{{"x0", m.x0}, {"y0", m.y0}, {"width", m.width()}, {"height", m.height()}, {"data", data}};
}

ProbMap prob_map_from_json(const json& j) {
  ProbMap m;
  m.x0 = j.at("x0").get<int>();
  m.y0 = j.at("y0").get<int>();
  const int w = j.at("width").get<int>();
  const int h = j.at("height").get<int>();
  const auto data = j.at("data").get<std::vector<float>>();
  if (static_cast<long>(data.size()) != static_cast<long>(w) * h) throw FormatError("prob map payload size mismatch");
  m.values.resize(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m.values(r, c) = data[static_cast<std::size_t>(r) * w + c];
  return m;
}

json to_json(const SynthScene& scene) {
  json instances = json::array();
  for (const TextInstance& inst : scene.instances) {
    instances.push_back({{"kind", to_string(inst.kind)},
                         {"boundary", to_flat(inst.boundary.vertices())},
                         {"kernel", to_flat(inst.kernel.vertices())},
                         {"prob", to_json(inst.prob)}});
  }
  return json{{"format_version", kDatasetFormatVersion},
              {"seed", scene.seed},
              {"canvas", {scene.width, scene.height}},
              {"instances", instances}};
}

SynthScene scene_from_json(const json& j) {
  check_version(j, kDatasetFormatVersion, "dataset record");
  SynthScene scene;
  scene.seed = j.at("seed").get<std::uint64_t>();
  scene.width = j.at("canvas").at(0).get<int>();
  scene.height = j.at("canvas").at(1).get<int>();
  for (const json& inst : j.at("instances")) {
    scene.instances.push_back(TextInstance{parse_shape_kind(inst.at("kind").get<std::string>()),
                                           Polygon(points_from_flat(inst.at("boundary"))),
                                           Polygon(points_from_flat(inst.at("kernel"))),
                                           prob_map_from_json(inst.at("prob"))});
  }
  return scene;
}

void write_dataset(const std::filesystem::path& path, const std::vector<SynthScene>& scenes) {
  std::ofstream out = open_out(path);
  for (const SynthScene& s : scenes) out << to_json(s).dump() << '\n';
}

std::vector<SynthScene> read_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<SynthScene> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    scenes.push_back(scene_from_json(json::parse(line)));
  }
  return scenes;
}

json to_json(const TrainConfig& cfg) {
  return json{{"lr0", cfg.lr0},
              {"poly_power", cfg.poly_power},
              {"lambda", cfg.lambda},
              {"batch_size", cfg.batch_size},
              {"max_steps", cfg.max_steps},
              {"shrink_ratio", cfg.shrink_ratio},
              {"n_vertices", cfg.n_vertices},
              {"dce_iterations", cfg.dce_iterations},
              {"loss_kind", to_string(cfg.loss_kind)},
              {"seed", cfg.seed},
              {"shape",
               {{"in_channels", cfg.shape.in_channels},
                {"hidden", cfg.shape.hidden},
                {"depth", cfg.shape.depth},
                {"kernel", cfg.shape.kernel}}},
              {"feature_scale", cfg.feature_scale},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_eps", cfg.adam_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr0 = j.at("lr0").get<double>();
  c.poly_power = j.at("poly_power").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_steps = j.at("max_steps").get<int>();
  c.shrink_ratio = j.at("shrink_ratio").get<double>();
  c.n_vertices = j.at("n_vertices").get<int>();
  c.dce_iterations = j.at("dce_iterations").get<int>();
  c.loss_kind = parse_loss_kind(j.at("loss_kind").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  const json& s = j.at("shape");
  c.shape = NetShape{s.at("in_channels").get<int>(), s.at("hidden").get<int>(), s.at("depth").get<int>(),
                     s.at("kernel").get<int>()};
  c.feature_scale = j.at("feature_scale").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  return c;
}

json to_json(const DeformNet& net) {
  json layers = json::array();
  for (const CircularConv& conv : net.layers) {
    layers.push_back({{"kernel", conv.kernel},
                      {"residual", conv.residual},
                      {"weight", matrix_to_json(conv.weight)},
                      {"bias", matrix_to_json(conv.bias)}});
  }
  return json{{"shape",
               {{"in_channels", net.shape.in_channels},
                {"hidden", net.shape.hidden},
                {"depth", net.shape.depth},
                {"kernel", net.shape.kernel}}},
              {"seed", net.seed},
              {"layers", layers},
              {"head_weight", matrix_to_json(net.head_weight)},
              {"head_bias", matrix_to_json(net.head_bias)}};
}

DeformNet net_from_json(const json& j) {
  const json& s = j.at("shape");
  const NetShape shape{s.at("in_channels").get<int>(), s.at("hidden").get<int>(), s.at("depth").get<int>(),
                       s.at("kernel").get<int>()};
  DeformNet net = DeformNet::zeros(shape);
  net.seed = j.at("seed").get<std::uint64_t>();
  const json& layers = j.at("layers");
  if (layers.size() != net.layers.size()) throw FormatError("checkpoint layer count does not match its shape");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CircularConv& conv = net.layers[l];
    conv.kernel = layers[l].at("kernel").get<int>();
    conv.residual = layers[l].at("residual").get<bool>();
    conv.weight = matrix_from_json<Eigen::MatrixXd>(layers[l].at("weight"));
    conv.bias = matrix_from_json<Eigen::RowVectorXd>(layers[l].at("bias"));
  }
  net.head_weight = matrix_from_json<Eigen::MatrixXd>(j.at("head_weight"));
  net.head_bias = matrix_from_json<Eigen::RowVector2d>(j.at("head_bias"));
  return net;
}

json to_json(const Checkpoint& ckpt) {
  std::ostringstream rng;
  rng << ckpt.state.rng;
  const TrainState& st = ckpt.state;
  return json{{"format_version", kCheckpointFormatVersion},
              {"config", to_json(ckpt.config)},
              {"seed", ckpt.config.seed},
              {"step", st.step},
              {"net", to_json(st.net)},
              {"adam",
               {{"step", st.adam.step},
                {"m", std::vector<double>(st.adam.m.data(), st.adam.m.data() + st.adam.m.size())},
                {"v", std::vector<double>(st.adam.v.data(), st.adam.v.data() + st.adam.v.size())}}},
              {"rng", rng.str()},
              {"loss_history", st.loss_history}};
}

Checkpoint checkpoint_from_json(const json& j) {
  check_version(j, kCheckpointFormatVersion, "checkpoint");
  Checkpoint c;
  c.config = train_config_from_json(j.at("config"));
  c.state.net = net_from_json(j.at("net"));
  c.state.step = j.at("step").get<int>();
  const auto m = j.at("adam").at("m").get<std::vector<double>>();
  const auto v = j.at("adam").at("v").get<std::vector<double>>();
  c.state.adam.m = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  c.state.adam.v = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  c.state.adam.step = j.at("adam").at("step").get<long>();
  if (c.state.adam.m.size() != c.state.net.num_params() || c.state.adam.v.size() != c.state.net.num_params())
    throw FormatError("checkpoint optimizer state does not match the network");
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> c.state.rng;
  if (!rng) throw FormatError("checkpoint rng state is malformed");
  c.state.loss_history = j.at("loss_history").get<std::vector<double>>();
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out = open_out(path);
  out << to_json(ckpt).dump() << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return checkpoint_from_json(json::parse(in));
}

void write_predictions(const std::filesystem::path& path, const std::vector<std::vector<Polygon>>& preds) {
  std::ofstream out = open_out(path);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    json polys = json::array();
    for (const Polygon& p : preds[s]) polys.push_back(to_flat(p.vertices()));
    out << json{{"format_version", kDatasetFormatVersion}, {"scene", s}, {"polygons", polys}}.dump() << '\n';
  }
}

std::vector<std::vector<Polygon>> read_predictions(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<Polygon>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    check_version(j, kDatasetFormatVersion, "predictions record");
    std::vector<Polygon> polys;
    for (const json& p : j.at("polygons")) polys.push_back(Polygon::unchecked(points_from_flat(p)));
    out.push_back(std::move(polys));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
}

}  // namespace dke
