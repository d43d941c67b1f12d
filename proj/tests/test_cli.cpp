#include "dke/serialization.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "dke_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(DKE_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dir(const std::string& name) {
  const fs::path d = kRoot / name;
  fs::remove_all(d);
  return d.string();
}

// Distinct arrow heads in a rendered scene.
std::pair<std::size_t, std::size_t> arrow_targets(const fs::path& svg) {
  const std::string text = slurp(svg);
  const std::regex line(R"re(<line x1="[^"]+" y1="[^"]+" x2="([^"]+)" y2="([^"]+)")re");
  std::set<std::string> heads;
  std::size_t total = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), line); it != std::sregex_iterator(); ++it) {
    heads.insert((*it)[1].str() + "," + (*it)[2].str());
    ++total;
  }
  return {total, heads.size()};
}

}  // namespace

TEST_CASE("gen is byte-deterministic and echoes its config") {
  const std::string a = dir("gen_a"), b = dir("gen_b");
  REQUIRE(run("gen --scenes 20 --seed 7 --out-dir " + a) == 0);
  REQUIRE(run("gen --scenes 20 --seed 7 --out-dir " + b) == 0);
  CHECK(slurp(fs::path(a) / "dataset.jsonl") == slurp(fs::path(b) / "dataset.jsonl"));
  CHECK(dke::read_dataset(fs::path(a) / "dataset.jsonl").size() == 20);

  const auto cfg = nlohmann::json::parse(slurp(fs::path(a) / "config.json"));
  CHECK(cfg.at("width") == 256);
  CHECK(cfg.at("height") == 256);
  CHECK(cfg.at("seed") == 7);
  CHECK(fs::exists(fs::path(a) / "meta.json"));

  // Re-running from the echoed config reproduces the artifact.
  const std::string c = dir("gen_c");
  REQUIRE(run("gen --config " + a + "/config.json --out-dir " + c) == 0);
  CHECK(slurp(fs::path(c) / "dataset.jsonl") == slurp(fs::path(a) / "dataset.jsonl"));
}

TEST_CASE("bad arguments are rejected") {
  CHECK(run("gen --scenes 0 --out-dir " + dir("gen_zero")) != 0);
  CHECK(run("gen --loss hinge --out-dir " + dir("gen_loss")) != 0);
  CHECK(run("gen --steps 5 --out-dir " + dir("gen_scope")) != 0);
  CHECK(run("") != 0);
  const std::string d = dir("bad_config");
  dke::write_text(fs::path(d) / "c.json", "{\"seeds\": 3}");
  CHECK(run("gen --config " + d + "/c.json --out-dir " + d) != 0);
}

TEST_CASE("ground truth scored as predictions gives F 100, with threshold gating") {
  const std::string d = dir("eval");
  REQUIRE(run("gen --scenes 5 --seed 3 --out-dir " + d) == 0);
  const auto scenes = dke::read_dataset(fs::path(d) / "dataset.jsonl");
  std::vector<std::vector<dke::Polygon>> preds;
  for (const auto& s : scenes) preds.push_back(s.boundaries());
  dke::write_predictions(fs::path(d) / "gt_preds.jsonl", preds);

  const std::string common = "eval --data " + d + "/dataset.jsonl --predictions " + d + "/gt_preds.jsonl --out-dir " + d;
  REQUIRE(run(common) == 0);
  const auto report = nlohmann::json::parse(slurp(fs::path(d) / "eval.json"));
  CHECK(report.at("f_measure").get<double>() == 100.0);

  dke::write_predictions(fs::path(d) / "none.jsonl", std::vector<std::vector<dke::Polygon>>(scenes.size()));
  CHECK(run("eval --data " + d + "/dataset.jsonl --predictions " + d + "/none.jsonl --min-f 50 --out-dir " + d) == 2);
  CHECK(run(common + " --min-f 99.9") == 0);
}

TEST_CASE("train with zero steps, then infer") {
  const std::string d = dir("train");
  REQUIRE(run("gen --scenes 3 --seed 5 --out-dir " + d) == 0);
  REQUIRE(run("train --data " + d + "/dataset.jsonl --steps 0 --out-dir " + d) == 0);
  const dke::Checkpoint ck = dke::read_checkpoint(fs::path(d) / "checkpoint.json");
  CHECK(ck.state.step == 0);
  CHECK(ck.state.net.flat() == dke::DeformNet::init(dke::NetShape{}, 1).flat());

  REQUIRE(run("infer --data " + d + "/dataset.jsonl --checkpoint " + d + "/checkpoint.json --out-dir " + d) == 0);
  CHECK(dke::read_predictions(fs::path(d) / "predictions.jsonl").size() == 3);

  REQUIRE(run("train --data " + d + "/dataset.jsonl --steps 0 --max-error 0.001 --out-dir " + d + "/gate") == 2);
}

TEST_CASE("viz is deterministic and shows each matching structure") {
  const std::string d = dir("viz");
  REQUIRE(run("gen --scenes 2 --seed 9 --out-dir " + d) == 0);
  const std::string data = " --data " + d + "/dataset.jsonl --viz-scenes 1";
  REQUIRE(run("viz --loss obgml" + data + " --out-dir " + d + "/o1") == 0);
  REQUIRE(run("viz --loss obgml" + data + " --out-dir " + d + "/o2") == 0);
  REQUIRE(run("viz --loss nnml" + data + " --out-dir " + d + "/n") == 0);
  const fs::path o1 = fs::path(d) / "o1/viz/scene_000.svg";
  CHECK(slurp(o1) == slurp(fs::path(d) / "o2/viz/scene_000.svg"));

  const auto [o_total, o_heads] = arrow_targets(o1);
  const auto [n_total, n_heads] = arrow_targets(fs::path(d) / "n/viz/scene_000.svg");
  CHECK(o_total > 0);
  CHECK(o_heads == o_total);
  CHECK(n_total == o_total);
  CHECK(n_heads < n_total);
}
