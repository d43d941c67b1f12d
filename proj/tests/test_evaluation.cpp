#include "dke/evaluation.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dke;

namespace {

Polygon rect(double x, double y, double w, double h) {
  Points r(4, 2);
  r << x, y, x + w, y, x + w, y + h, x, y + h;
  return Polygon(r);
}

// Counts whose precision and recall are exactly p and r (given in tenths of a
// percent): matched = p*r, predictions = 1000*r, ground truth = 1000*p.
EvalReport from_rates(int p_tenths, int r_tenths) {
  const int matched = p_tenths * r_tenths;
  return EvalReport::from_counts({SceneCounts{matched, 1000 * p_tenths - matched, 1000 * r_tenths - matched}});
}

}  // namespace

TEST_CASE("perfect detection") {
  const std::vector<Polygon> gts{rect(0, 0, 40, 20), rect(60, 0, 30, 30)};
  const EvalReport r = evaluate(gts, gts);
  CHECK(r.precision == 100.0);
  CHECK(r.recall == 100.0);
  CHECK(r.f_measure == 100.0);
  CHECK(r.mean_iou_of_matches == 1.0);
}

TEST_CASE("harmonic mean against table rows") {
  CHECK(from_rates(893, 795).precision == doctest::Approx(89.3));
  CHECK(from_rates(893, 795).recall == doctest::Approx(79.5));
  CHECK(std::abs(from_rates(893, 795).f_measure - 84.1) <= 0.05);
  CHECK(std::abs(from_rates(908, 851).f_measure - 87.9) <= 0.05);
  CHECK(f_measure(0.0, 0.0) == 0.0);
  CHECK(f_measure(50.0, 50.0) == 50.0);
}

TEST_CASE("greedy matching prefers the highest IoU") {
  const std::vector<Polygon> gts{rect(0, 0, 40, 20)};
  const std::vector<Polygon> preds{rect(2, 0, 40, 20), rect(0, 0, 40, 20)};
  const SceneMatch m = match_scene(preds, gts, 0.5);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].first == 1);
  CHECK(m.counts.spurious == 1);
  CHECK(m.counts.missed == 0);
}

TEST_CASE("threshold is inclusive and below-threshold pairs do not match") {
  const std::vector<Polygon> gts{rect(0, 0, 100, 40)};
  // Kernel of a 100x40 box at r = 0.4 is 76x16: IoU 1216 / 4000 = 0.304.
  const std::vector<Polygon> kernel{rect(12, 12, 76, 16)};
  CHECK(polygon_iou(kernel[0], gts[0]) == doctest::Approx(0.304).epsilon(1e-3));
  const EvalReport r = evaluate(kernel, gts, 0.5);
  CHECK(r.f_measure == 0.0);
  CHECK(evaluate(kernel, gts, 0.3).f_measure == 100.0);
}

TEST_CASE("empty inputs") {
  const std::vector<Polygon> none;
  const std::vector<Polygon> one{rect(0, 0, 10, 10)};
  const EvalReport both = evaluate(none, none);
  CHECK(both.precision == 100.0);
  CHECK(both.recall == 100.0);
  const EvalReport missed = evaluate(none, one);
  CHECK(missed.recall == 0.0);
  CHECK(missed.f_measure == 0.0);
  const EvalReport spurious = evaluate(one, none);
  CHECK(spurious.precision == 0.0);
  CHECK_THROWS(evaluate_scenes({none}, {none, none}));
}

TEST_CASE("evaluation properties") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0, 200), side(10, 50), jitter(-6, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Polygon> gts, preds;
    for (int k = 0; k < 4; ++k) {
      const double x = pos(rng), y = pos(rng), w = side(rng), h = side(rng);
      gts.push_back(rect(x, y, w, h));
      preds.push_back(rect(x + jitter(rng), y + jitter(rng), w, h));
    }
    const EvalReport base = evaluate(preds, gts);
    // Simultaneous permutation of both lists.
    std::vector<Polygon> rp(preds.rbegin(), preds.rend()), rg(gts.rbegin(), gts.rend());
    const EvalReport perm = evaluate(rp, rg);
    CHECK(perm.precision == base.precision);
    CHECK(perm.recall == base.recall);
    // One far-away spurious prediction lowers P and leaves R.
    preds.push_back(rect(1000, 1000, 5, 5));
    const EvalReport extra = evaluate(preds, gts);
    CHECK(extra.recall == base.recall);
    if (base.matched() > 0) CHECK(extra.precision < base.precision);
    CHECK(extra.f_measure == doctest::Approx(f_measure(extra.precision, extra.recall)));
  }
}

TEST_CASE("baseline expansion") {
  const Polygon gt = rect(10, 10, 100, 40);
  const Polygon kernel = offset(gt, -shrink_margin(gt, 0.4));
  CHECK(hausdorff(fixed_expand_baseline(kernel, 12.0).vertices(), gt.vertices()) < 1e-9);
  CHECK(fixed_expand_baseline(kernel, 0.0) == kernel);
  CHECK_THROWS(fixed_expand_baseline(kernel, -1.0));

  // The unclip inverse recovers the margin the kernel was made with.
  CHECK(unclip_margin(kernel, 0.4) == doctest::Approx(12.0).epsilon(1e-9));

  RibbonSpec spec;
  spec.center = Point(128, 128);
  spec.amplitude = 15;
  spec.wavelength = 150;
  spec.length = 150;
  spec.half_width = 18;
  const Polygon ribbon = make_ribbon(spec);
  const Polygon rk = offset(ribbon, -shrink_margin(ribbon, 0.4));
  const Polygon grown = fixed_expand_baseline(rk, unclip_margin(rk, 0.4));
  CHECK(is_simple(grown.vertices()));
  CHECK(polygon_iou(grown, ribbon) > 0.9);
}

TEST_CASE("ablation table shape and oracle rows") {
  const auto scenes = make_dataset(4, 2, SceneConfig{}, 3);
  std::map<LossKind, DeformNet> zero{{LossKind::kDml, DeformNet::zeros(NetShape{})},
                                     {LossKind::kNnml, DeformNet::zeros(NetShape{})},
                                     {LossKind::kObgml, DeformNet::zeros(NetShape{})}};
  AblationConfig cfg;
  cfg.kernel_noise = 0.0;
  const auto rows = run_ablation(scenes, zero, cfg);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].method == "Baseline");
  CHECK(rows[3].method == "DCE+OBGML");
  CHECK(rows[4].iterations == 2);
  // A zero net leaves kernels in place; kernels never clear 0.5 IoU at r = 0.4.
  for (const AblationRow& r : rows)
    if (r.method != "Baseline") CHECK(r.report.f_measure == 0.0);
  CHECK(rows[1].report.per_scene.size() == 4);
  // Baseline on noise-free kernels recovers most instances.
  CHECK(rows[0].report.f_measure > 80.0);

  const std::string table = format_ablation(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 9);
  CHECK(run_ablation(scenes, zero, cfg)[2].report.f_measure == rows[2].report.f_measure);

  zero.erase(LossKind::kNnml);
  CHECK_THROWS(run_ablation(scenes, zero, cfg));
}

TEST_CASE("benchmark preconditions and consistency") {
  const auto scenes = make_dataset(3, 2, SceneConfig{}, 8);
  const DeformNet net = DeformNet::init(NetShape{}, 1);
  CHECK_THROWS(benchmark(net, scenes, AblationConfig{}, 2));
  CHECK_THROWS(benchmark(net, {}, AblationConfig{}, 3));
  const TimingReport t = benchmark(net, scenes, AblationConfig{}, 3);
  const double stages = t.stages.kernel_ms + t.stages.featurize_ms + t.stages.forward_ms + t.stages.expand_ms;
  CHECK(stages <= t.total_ms * 1.05);
  CHECK(t.scenes_per_second > 0.0);
}
