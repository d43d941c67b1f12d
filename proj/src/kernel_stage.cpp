#include "dke/kernel_stage.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dke {

void ProbMap::paste_max(ProbMap& canvas) const {
  for (int r = 0; r < height(); ++r) {
    const int cy = y0 + r - canvas.y0;
    if (cy < 0 || cy >= canvas.height()) continue;
    for (int c = 0; c < width(); ++c) {
      const int cx = x0 + c - canvas.x0;
      if (cx < 0 || cx >= canvas.width()) continue;
      canvas.values(cy, cx) = std::max(canvas.values(cy, cx), values(r, c));
    }
  }
}

namespace {

void check_same_shape(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw std::invalid_argument("segmentation loss: shape mismatch");
}

double pixel_bce(double p, double y) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double pixel_bce_grad(double p, double y) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return -y / p + (1.0 - y) / (1.0 - p);
}

}  // namespace

MiningMask mine_hard_negatives(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  check_same_shape(pred, gt);
  const Eigen::Index h = pred.rows();
  const Eigen::Index w = pred.cols();
  MiningMask mask{BinaryMask::Constant(h, w, false), 0, 0};

  struct Candidate {
    double loss;
    Eigen::Index index;  // row-major
  };
  std::vector<Candidate> negatives;
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      if (gt(r, c) > 0.5) {
        mask.selected(r, c) = true;
        ++mask.positives;
      } else {
        negatives.push_back({pixel_bce(pred(r, c), 0.0), r * w + c});
      }
    }
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(kNegativeRatio) * static_cast<std::size_t>(mask.positives),
                                          negatives.size());
  std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(keep), negatives.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.loss > b.loss || (a.loss == b.loss && a.index < b.index);
                    });
  for (std::size_t k = 0; k < keep; ++k) mask.selected(negatives[k].index / w, negatives[k].index % w) = true;
  mask.negatives = static_cast<int>(keep);
  return mask;
}

SegmentationLoss bce_masked(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, const MiningMask& mask) {
  check_same_shape(pred, gt);
  SegmentationLoss out;
  out.grad = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
  for (Eigen::Index c = 0; c < pred.cols(); ++c) {
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      if (!mask.selected(r, c)) continue;
      out.value += pixel_bce(pred(r, c), gt(r, c));
      out.grad(r, c) = pixel_bce_grad(pred(r, c), gt(r, c));
    }
  }
  out.mask = mask;
  return out;
}

SegmentationLoss bce_ohem_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  return bce_masked(pred, gt, mine_hard_negatives(pred, gt));
}

BinaryMask binarize(const ProbMap& pred, double threshold) {
  return (pred.values.array() >= static_cast<float>(threshold));
}

BinaryMask rasterize(const Points& ring, int width, int height) {
  BinaryMask mask = BinaryMask::Constant(height, width, false);
  std::vector<double> xs;
  const Eigen::Index n = ring.rows();
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
      const double yi = ring(i, 1);
      const double yj = ring(j, 1);
      if ((yi <= yc) != (yj <= yc)) xs.push_back(ring(i, 0) + (yc - yi) * (ring(j, 0) - ring(i, 0)) / (yj - yi));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int lo = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int hi = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int x = lo; x < hi; ++x) mask(y, x) = true;
    }
  }
  return mask;
}

namespace {

using Corner = Eigen::Vector2i;

struct Step {
  Corner corner;
  Corner dir_in;
  Corner dir_out;
};

// Traces the outer pixel-edge boundary of the component containing the
// raster-first pixel (px, py), keeping foreground on the right.
std::vector<Step> trace_outer(const Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>& labels, int label, int px,
                              int py) {
  const int h = static_cast<int>(labels.rows());
  const int w = static_cast<int>(labels.cols());
  auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && labels(y, x) == label; };
  // Pixel whose centre is corner + (ox, oy) / 2, for ox, oy in {-1, 1}.
  auto pixel_at = [&](const Corner& c, int ox, int oy) {
    return fg(c.x() + (ox > 0 ? 0 : -1), c.y() + (oy > 0 ? 0 : -1));
  };

  std::vector<Step> steps;
  const Corner start(px, py);
  const Corner start_dir(0, -1);
  Corner c = start;
  Corner d = start_dir;
  do {
    const Corner right(-d.y(), d.x());
    const Corner ahead_left = d - right;
    const Corner ahead_right = d + right;
    Corner next;
    if (pixel_at(c, ahead_left.x(), ahead_left.y())) next = Corner(d.y(), -d.x());
    else if (pixel_at(c, ahead_right.x(), ahead_right.y())) next = d;
    else next = right;
    if (next != d) steps.push_back({c, d, next});
    c += next;
    d = next;
  } while (!(c == start && d == start_dir));
  return steps;
}

}  // namespace

std::vector<Polygon> extract_kernels(const BinaryMask& mask, double min_area) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> labels = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(h, w);
  std::vector<Eigen::Vector2i> seeds;
  int next_label = 0;
  std::deque<Eigen::Vector2i> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || labels(y, x) != 0) continue;
      ++next_label;
      seeds.emplace_back(x, y);
      labels(y, x) = next_label;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const Eigen::Vector2i p = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = p.x() + dx;
            const int qy = p.y() + dy;
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            if (!mask(qy, qx) || labels(qy, qx) != 0) continue;
            labels(qy, qx) = next_label;
            queue.emplace_back(qx, qy);
          }
        }
      }
    }
  }

  std::vector<Polygon> out;
  for (int k = 0; k < next_label; ++k) {
    const std::vector<Step> steps = trace_outer(labels, k + 1, seeds[static_cast<std::size_t>(k)].x(),
                                                seeds[static_cast<std::size_t>(k)].y());
    // Diagonal pinches visit a corner twice; pull each visit off the corner
    // so the ring stays simple.
    std::map<std::pair<int, int>, int> visits;
    for (const Step& s : steps) ++visits[{s.corner.x(), s.corner.y()}];
    Points ring(static_cast<Eigen::Index>(steps.size()), 2);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const Step& s = steps[i];
      Eigen::Vector2d p = s.corner.cast<double>();
      if (visits[{s.corner.x(), s.corner.y()}] > 1) p += 0.25 * (s.dir_out - s.dir_in).cast<double>();
      ring.row(static_cast<Eigen::Index>(i)) = p.transpose();
    }
    Polygon poly(std::move(ring));
    if (area(poly) < min_area) continue;
    out.push_back(std::move(poly));
  }
  return out;
}

ProbMap noisy_kernel_oracle(const Polygon& boundary, const ShrinkParams& shrink, double noise_px, std::uint64_t seed,
                            int width, int height) {
  if (noise_px < 0.0) throw std::invalid_argument("noise must be non-negative");
  const Polygon kernel = offset(boundary, -shrink.margin);
  ProbMap out{Eigen::MatrixXf::Zero(height, width), 0, 0};
  if (noise_px == 0.0) {
    out.values = rasterize(kernel.vertices(), width, height).cast<float>().matrix();
    return out;
  }

  constexpr int kDense = 128;
  constexpr int kControls = 8;
  const Contour dense = sample_and_sort(kernel, kDense);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_px);
  Eigen::Matrix<double, kControls, 2> controls;
  for (int k = 0; k < kControls; ++k) {
    controls(k, 0) = gauss(rng);
    controls(k, 1) = gauss(rng);
  }
  Points jittered = dense.points;
  constexpr double span = static_cast<double>(kDense) / kControls;
  for (int i = 0; i < kDense; ++i) {
    const double pos = i / span;
    const int k0 = static_cast<int>(std::floor(pos)) % kControls;
    const int k1 = (k0 + 1) % kControls;
    const double t = pos - std::floor(pos);
    jittered.row(i) += (1.0 - t) * controls.row(k0) + t * controls.row(k1);
  }
  const Eigen::MatrixXf hard = rasterize(jittered, width, height).cast<float>().matrix();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      float sum = 0.0f;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = x + dx;
          const int qy = y + dy;
          if (qx < 0 || qy < 0 || qx >= width || qy >= height) continue;
          sum += hard(qy, qx);
          ++count;
        }
      }
      out.values(y, x) = sum / static_cast<float>(count);
    }
  }
  return out;
}

}  // namespace dke
