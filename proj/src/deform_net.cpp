#include "dke/deform_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dke {

double SurrogateFeatureField::sample(double x, double y) const {
  const int w = width();
  const int h = height();
  if (w == 0 || h == 0) return 0.0;
  const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(w - 1));
  const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(h - 1));
  const int c0 = static_cast<int>(std::floor(u));
  const int r0 = static_cast<int>(std::floor(v));
  const int c1 = std::min(c0 + 1, w - 1);
  const int r1 = std::min(r0 + 1, h - 1);
  const double fu = u - c0;
  const double fv = v - r0;
  const double top = (1.0 - fu) * prob(r0, c0) + fu * prob(r0, c1);
  const double bottom = (1.0 - fu) * prob(r1, c0) + fu * prob(r1, c1);
  return (1.0 - fv) * top + fv * bottom;
}

SurrogateFeatureField make_feature_field(int width, int height, const std::vector<Polygon>& boundaries,
                                         double scale) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("feature field needs a positive size");
  if (!(scale > 0.0)) throw std::invalid_argument("feature field scale must be positive");
  SurrogateFeatureField f{Eigen::MatrixXf::Zero(height, width)};
  for (const Polygon& p : boundaries) {
    const BoundingBox b = bbox(p);
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x0)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y0)));
    const int x1 = std::min(width, static_cast<int>(std::ceil(b.x0 + b.width)) + 1);
    const int y1 = std::min(height, static_cast<int>(std::ceil(b.y0 + b.height)) + 1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const Point q(x + 0.5, y + 0.5);
        if (!contains(p.vertices(), q)) continue;
        const double v = std::min(1.0, distance_to_boundary(p.vertices(), q) / scale);
        f.prob(y, x) = std::max(f.prob(y, x), static_cast<float>(v));
      }
    }
  }
  return f;
}

VertexFeatures featurize(const Contour& c, const SurrogateFeatureField& f, const BoundingBox& box) {
  const Eigen::Index n = c.size();
  VertexFeatures u(n, kFeatureChannels);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = c.points(i, 0);
    const double y = c.points(i, 1);
    u(i, 0) = f.sample(x, y);
    u(i, 1) = f.sample(x + kRingRadius, y);
    u(i, 2) = f.sample(x - kRingRadius, y);
    u(i, 3) = f.sample(x, y + kRingRadius);
    u(i, 4) = f.sample(x, y - kRingRadius);
    u(i, 5) = box.width > 0.0 ? std::clamp((x - box.x0) / box.width, 0.0, 1.0) : 0.0;
    u(i, 6) = box.height > 0.0 ? std::clamp((y - box.y0) / box.height, 0.0, 1.0) : 0.0;
    u(i, 7) = static_cast<double>(i) / static_cast<double>(n);
  }
  return u;
}

namespace {

void check_shape(const NetShape& s) {
  if (s.in_channels < 1 || s.hidden < 1 || s.depth < 1 || s.kernel < 1 || s.kernel % 2 == 0)
    throw std::invalid_argument("net shape needs positive sizes and an odd kernel");
}

DeformNet skeleton(const NetShape& shape) {
  check_shape(shape);
  DeformNet net;
  net.shape = shape;
  int in = shape.in_channels;
  for (int l = 0; l < shape.depth; ++l) {
    CircularConv conv;
    conv.kernel = shape.kernel;
    conv.weight = Eigen::MatrixXd::Zero(shape.kernel * in, shape.hidden);
    conv.bias = Eigen::RowVectorXd::Zero(shape.hidden);
    conv.residual = in == shape.hidden;
    net.layers.push_back(std::move(conv));
    in = shape.hidden;
  }
  net.head_weight = Eigen::MatrixXd::Zero(shape.hidden, 2);
  return net;
}

// Tap t of row i reads row (i + t - kernel / 2) mod n of the same contour block.
void unroll(const Eigen::MatrixXd& h, int n, int kernel, Eigen::MatrixXd& cols) {
  const Eigen::Index c = h.cols();
  const Eigen::Index m = h.rows();
  cols.resize(m, kernel * c);
  const int half = kernel / 2;
  for (int t = 0; t < kernel; ++t) {
    const int s = ((t - half) % n + n) % n;
    for (Eigen::Index b = 0; b < m; b += n) {
      cols.block(b, t * c, n - s, c) = h.block(b + s, 0, n - s, c);
      if (s > 0) cols.block(b + n - s, t * c, s, c) = h.block(b, 0, s, c);
    }
  }
}

void roll_back(const Eigen::MatrixXd& dcols, int n, int kernel, Eigen::Index channels, Eigen::MatrixXd& dh) {
  const Eigen::Index m = dcols.rows();
  dh.setZero(m, channels);
  const int half = kernel / 2;
  for (int t = 0; t < kernel; ++t) {
    const int s = ((t - half) % n + n) % n;
    for (Eigen::Index b = 0; b < m; b += n) {
      dh.block(b + s, 0, n - s, channels) += dcols.block(b, t * channels, n - s, channels);
      if (s > 0) dh.block(b, 0, s, channels) += dcols.block(b + n - s, t * channels, s, channels);
    }
  }
}

}  // namespace

DeformNet DeformNet::zeros(const NetShape& shape) { return skeleton(shape); }

DeformNet DeformNet::init(const NetShape& shape, std::uint64_t seed) {
  DeformNet net = skeleton(shape);
  net.seed = seed;
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto& m, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  };
  for (CircularConv& conv : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(conv.weight.rows()));
    fill(conv.weight, bound);
    fill(conv.bias, bound);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  fill(net.head_weight, bound);
  fill(net.head_bias, bound);
  return net;
}

Eigen::Index DeformNet::num_params() const {
  Eigen::Index total = head_weight.size() + head_bias.size();
  for (const CircularConv& conv : layers) total += conv.weight.size() + conv.bias.size();
  return total;
}

Eigen::VectorXd DeformNet::flat() const {
  Eigen::VectorXd out(num_params());
  Eigen::Index k = 0;
  auto put = [&](const auto& m) {
    out.segment(k, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    k += m.size();
  };
  for (const CircularConv& conv : layers) {
    put(conv.weight);
    put(conv.bias);
  }
  put(head_weight);
  put(head_bias);
  return out;
}

void DeformNet::set_flat(const Eigen::VectorXd& params) {
  if (params.size() != num_params()) throw std::invalid_argument("parameter vector size mismatch");
  Eigen::Index k = 0;
  auto get = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = params.segment(k, m.size());
    k += m.size();
  };
  for (CircularConv& conv : layers) {
    get(conv.weight);
    get(conv.bias);
  }
  get(head_weight);
  get(head_bias);
}

OffsetField forward(const DeformNet& net, const VertexFeatures& u, ForwardCache* cache, int contour_length) {
  const int n = contour_length > 0 ? contour_length : static_cast<int>(u.rows());
  if (n == 0 || u.rows() % n != 0) throw std::invalid_argument("forward: rows are not a whole number of contours");
  if (u.cols() != net.shape.in_channels) throw std::invalid_argument("forward: channel count mismatch");

  if (cache != nullptr) {
    cache->contour_length = n;
    cache->inputs.clear();
    cache->columns.clear();
    cache->pre_act.clear();
  }
  Eigen::MatrixXd h = u;
  Eigen::MatrixXd cols;
  for (const CircularConv& conv : net.layers) {
    unroll(h, n, conv.kernel, cols);
    Eigen::MatrixXd z = cols * conv.weight;
    z.rowwise() += conv.bias;
    Eigen::MatrixXd next = z.cwiseMax(0.0);
    if (conv.residual) next += h;
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->columns.push_back(cols);
      cache->pre_act.push_back(std::move(z));
    }
    h = std::move(next);
  }
  OffsetField out = h * net.head_weight;
  out.rowwise() += net.head_bias;
  if (cache != nullptr) cache->head_input = std::move(h);
  return out;
}

Gradients backward(const DeformNet& net, const ForwardCache& cache, const OffsetField& upstream) {
  if (upstream.rows() != cache.head_input.rows()) throw std::invalid_argument("backward: upstream size mismatch");
  if (cache.inputs.size() != net.layers.size()) throw std::invalid_argument("backward: cache does not match net");
  Gradients g{DeformNet::zeros(net.shape), Eigen::MatrixXd()};
  g.params.seed = net.seed;

  g.params.head_weight = cache.head_input.transpose() * upstream;
  g.params.head_bias = upstream.colwise().sum();
  Eigen::MatrixXd dh = upstream * net.head_weight.transpose();

  Eigen::MatrixXd din;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const CircularConv& conv = net.layers[l];
    const Eigen::MatrixXd dz = dh.cwiseProduct((cache.pre_act[l].array() > 0.0).cast<double>().matrix());
    g.params.layers[l].weight = cache.columns[l].transpose() * dz;
    g.params.layers[l].bias = dz.colwise().sum();
    const Eigen::MatrixXd dcols = dz * conv.weight.transpose();
    roll_back(dcols, cache.contour_length, conv.kernel, conv.in_channels(), din);
    if (conv.residual) din += dh;
    dh = std::move(din);
  }
  g.inputs = std::move(dh);
  return g;
}

Contour expand(const Contour& c, const OffsetField& offsets) {
  if (offsets.rows() != c.size() || offsets.cols() != 2) throw std::invalid_argument("expand: length mismatch");
  return Contour{c.points + offsets};
}

}  // namespace dke
