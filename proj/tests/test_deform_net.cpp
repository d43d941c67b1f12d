#include "dke/assignment.hpp"
#include "dke/deform_net.hpp"

#include <doctest.h>

#include <random>

using namespace dke;

namespace {

VertexFeatures random_features(std::mt19937_64& rng, Eigen::Index rows, int channels) {
  std::uniform_real_distribution<double> u(-1, 1);
  VertexFeatures f(rows, channels);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
  return f;
}

// Scalar objective sum(W .* forward(u)) so the upstream gradient is W.
double objective(const DeformNet& net, const VertexFeatures& u, const OffsetField& w, int n) {
  return forward(net, u, nullptr, n).cwiseProduct(w).sum();
}

double min_abs_preact(const DeformNet& net, const VertexFeatures& u, int n) {
  ForwardCache cache;
  forward(net, u, &cache, n);
  double m = std::numeric_limits<double>::infinity();
  for (const auto& z : cache.pre_act) m = std::min(m, z.cwiseAbs().minCoeff());
  return m;
}

Contour rectangle_contour(double x, double y, double w, double h, int n) {
  Points r(4, 2);
  r << x, y, x + w, y, x + w, y + h, x, y + h;
  return sample_and_sort(Polygon(r), n);
}

}  // namespace

TEST_CASE("feature field sampling") {
  SurrogateFeatureField f{Eigen::MatrixXf::Constant(10, 20, 1.0f)};
  Contour c = rectangle_contour(2, 2, 10, 5, 16);
  const BoundingBox box = bbox(c.points);
  const VertexFeatures u = featurize(c, f, box);
  CHECK(u.rows() == 16);
  CHECK(u.cols() == kFeatureChannels);
  CHECK((u.leftCols(5).array() == 1.0).all());

  // Spacing is 30 / 16, so vertex 0 and vertex 8 land on opposite corners.
  CHECK(u(0, 5) == 0.0);
  CHECK(u(0, 6) == 0.0);
  const Eigen::Index far = 8;
  CHECK(c[far].isApprox(Point(12, 7)));
  CHECK(u(far, 5) == 1.0);
  CHECK(u(far, 6) == 1.0);
  CHECK(u(4, 7) == 0.25);
}

TEST_CASE("feature field bilinear interpolation clamps at the border") {
  SurrogateFeatureField f{Eigen::MatrixXf::Zero(2, 2)};
  f.prob(0, 1) = 1.0f;
  CHECK(f.sample(0.5, 0.5) == 0.0);
  CHECK(f.sample(1.5, 0.5) == 1.0);
  CHECK(f.sample(1.0, 0.5) == doctest::Approx(0.5));
  CHECK(f.sample(100.0, -100.0) == 1.0);
}

TEST_CASE("make_feature_field ramps inward from the boundary") {
  Points r(4, 2);
  r << 10, 10, 74, 10, 74, 50, 10, 50;
  const SurrogateFeatureField f = make_feature_field(96, 64, {Polygon(r)}, 8.0);
  CHECK(f.prob(0, 0) == 0.0f);
  CHECK(f.prob(30, 40) == 1.0f);
  CHECK(f.prob(10, 40) == doctest::Approx(0.5 / 8.0));
  CHECK(f.prob.minCoeff() >= 0.0f);
  CHECK(f.prob.maxCoeff() <= 1.0f);
}

TEST_CASE("forward shapes and zero network") {
  std::mt19937_64 rng(1);
  const VertexFeatures u = random_features(rng, 128, 8);
  const OffsetField zero = forward(DeformNet::zeros(NetShape{}), u);
  CHECK(zero.rows() == 128);
  CHECK(zero.cols() == 2);
  CHECK(zero.isZero());
  CHECK_THROWS(forward(DeformNet::zeros(NetShape{}), random_features(rng, 128, 7)));
  CHECK_THROWS(forward(DeformNet::zeros(NetShape{}), u, nullptr, 100));
}

TEST_CASE("init is seeded and bounded") {
  const DeformNet a = DeformNet::init(NetShape{}, 7);
  const DeformNet b = DeformNet::init(NetShape{}, 7);
  const DeformNet c = DeformNet::init(NetShape{}, 8);
  CHECK(a.flat() == b.flat());
  CHECK(a.flat() != c.flat());
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(9.0 * 8.0));
  CHECK(a.layers[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(9.0 * 64.0));
  CHECK(!a.layers[0].residual);
  CHECK(a.layers[1].residual);
  CHECK(a.num_params() == a.flat().size());
  DeformNet d = DeformNet::zeros(NetShape{});
  d.set_flat(a.flat());
  CHECK(d.flat() == a.flat());
}

TEST_CASE("forward is equivariant to cyclic shifts") {
  std::mt19937_64 rng(2);
  const DeformNet net = DeformNet::init(NetShape{}, 3);
  const VertexFeatures u = random_features(rng, 128, 8);
  const OffsetField out = forward(net, u);
  for (int k : {1, 5, 64, 127}) {
    VertexFeatures shifted(128, 8);
    shifted << u.bottomRows(128 - k), u.topRows(k);
    OffsetField expected(128, 2);
    expected << out.bottomRows(128 - k), out.topRows(k);
    CHECK((forward(net, shifted) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("stacked contours are independent") {
  std::mt19937_64 rng(4);
  const DeformNet net = DeformNet::init(NetShape{}, 5);
  const VertexFeatures a = random_features(rng, 32, 8);
  const VertexFeatures b = random_features(rng, 32, 8);
  VertexFeatures ab(64, 8);
  ab << a, b;
  const OffsetField stacked = forward(net, ab, nullptr, 32);
  CHECK((stacked.topRows(32) - forward(net, a)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((stacked.bottomRows(32) - forward(net, b)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward matches central differences for every layer") {
  std::mt19937_64 rng(11);
  const NetShape shape{8, 6, 3, 5};
  int configs = 0;
  for (int trial = 0; trial < 200 && configs < 20; ++trial) {
    const DeformNet net = DeformNet::init(shape, 100 + trial);
    const int n = 10;
    const VertexFeatures u = random_features(rng, 2 * n, 8);
    if (min_abs_preact(net, u, n) < 1e-3) continue;  // keep clear of ReLU kinks
    const OffsetField w = random_features(rng, 2 * n, 2);
    ForwardCache cache;
    forward(net, u, &cache, n);
    const Gradients g = backward(net, cache, w);

    const Eigen::VectorXd theta = net.flat();
    const Eigen::VectorXd analytic = g.params.flat();
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      DeformNet plus = net, minus = net;
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      plus.set_flat(tp);
      minus.set_flat(tm);
      const double num = (objective(plus, u, w, n) - objective(minus, u, w, n)) / (2 * h);
      worst = std::max(worst, std::abs(num - analytic(k)) / std::max(1.0, std::abs(num)));
    }
    CHECK(worst < 1e-3);

    double worst_in = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      VertexFeatures up = u, um = u;
      up.data()[k] += h;
      um.data()[k] -= h;
      const double num = (objective(net, up, w, n) - objective(net, um, w, n)) / (2 * h);
      worst_in = std::max(worst_in, std::abs(num - g.inputs.data()[k]) / std::max(1.0, std::abs(num)));
    }
    CHECK(worst_in < 1e-3);
    ++configs;
  }
  CHECK(configs >= 20);
}

TEST_CASE("zero upstream gives zero parameter gradients") {
  std::mt19937_64 rng(12);
  const DeformNet net = DeformNet::init(NetShape{}, 9);
  const VertexFeatures u = random_features(rng, 64, 8);
  ForwardCache cache;
  forward(net, u, &cache);
  const Gradients g = backward(net, cache, OffsetField::Zero(64, 2));
  CHECK(g.params.flat().isZero());
  CHECK(g.inputs.isZero());
}

TEST_CASE("expand") {
  const Contour c = rectangle_contour(0, 0, 30, 10, 16);
  CHECK(expand(c, OffsetField::Zero(16, 2)).points == c.points);
  OffsetField t(16, 2);
  t.col(0).setConstant(2.0);
  t.col(1).setConstant(3.0);
  const Contour moved = expand(c, t);
  CHECK(((moved.points - c.points).col(0).array() - 2.0).abs().maxCoeff() < 1e-12);
  CHECK(((moved.points - c.points).col(1).array() - 3.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS(expand(c, OffsetField::Zero(15, 2)));

  // Kernel plus the exact offsets to the boundary lands on the boundary.
  const Contour kernel = rectangle_contour(10, 10, 80, 20, 128);
  const Contour gt = rectangle_contour(0, 0, 100, 40, 128);
  const Contour pred = expand(kernel, gt.points - kernel.points);
  CHECK(obgml_loss(pred, gt).value < 1e-20);
}
