#include "dke/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace dke {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kDml: return "dml";
    case LossKind::kNnml: return "nnml";
    case LossKind::kObgml: return "obgml";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "dml") return LossKind::kDml;
  if (name == "nnml") return LossKind::kNnml;
  if (name == "obgml") return LossKind::kObgml;
  throw std::invalid_argument("unknown loss kind: " + std::string(name));
}

std::vector<int> Assignment::target_of() const {
  std::vector<int> out(pairs.size(), -1);
  for (const auto& [i, j] : pairs) out[static_cast<std::size_t>(i)] = j;
  return out;
}

namespace {

// Shortest augmenting path Hungarian method with row/column potentials.
// On return u, v are feasible duals and col_of is an optimal matching.
void solve_with_potentials(const CostMatrix& c, std::vector<double>& u, std::vector<double>& v,
                           std::vector<int>& col_of) {
  const int n = static_cast<int>(c.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internal indexing; column 0 is the virtual source.
  u.assign(static_cast<std::size_t>(n) + 1, 0.0);
  v.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> row_of_col(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(n) + 1);
  std::vector<char> used(static_cast<std::size_t>(n) + 1);

  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = row_of_col[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(row_of_col[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      row_of_col[static_cast<std::size_t>(j0)] = row_of_col[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  col_of.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) col_of[static_cast<std::size_t>(row_of_col[static_cast<std::size_t>(j)] - 1)] = j - 1;
}

// Moves an optimal matching to the lexicographically smallest optimal one.
// Optimal matchings are exactly the perfect matchings on tight edges
// (zero reduced cost), so rows are fixed greedily, re-routing the displaced
// row along an alternating path of tight edges.
class LexRefiner {
 public:
  LexRefiner(const CostMatrix& c, const std::vector<double>& u, const std::vector<double>& v,
             std::vector<int>& col_of)
      : n_(static_cast<int>(c.rows())), col_of_(col_of), row_of_(static_cast<std::size_t>(n_), -1),
        locked_(static_cast<std::size_t>(n_), 0), tight_(static_cast<std::size_t>(n_)) {
    const double tol = 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff());
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const double reduced = c(i, j) - u[static_cast<std::size_t>(i) + 1] - v[static_cast<std::size_t>(j) + 1];
        if (reduced <= tol) tight_[static_cast<std::size_t>(i)].push_back(j);
      }
    }
    for (int i = 0; i < n_; ++i) row_of_[static_cast<std::size_t>(col_of_[static_cast<std::size_t>(i)])] = i;
  }

  void run() {
    for (int i = 0; i < n_; ++i) {
      for (int j : tight_[static_cast<std::size_t>(i)]) {
        if (locked_[static_cast<std::size_t>(j)]) continue;
        if (col_of_[static_cast<std::size_t>(i)] == j || reroute(i, j)) break;
      }
      locked_[static_cast<std::size_t>(col_of_[static_cast<std::size_t>(i)])] = 1;
    }
  }

 private:
  // Gives column j to row i; the row that held j must reach i's old column.
  bool reroute(int i, int j) {
    const int freed = col_of_[static_cast<std::size_t>(i)];
    const int displaced = row_of_[static_cast<std::size_t>(j)];
    visited_.assign(static_cast<std::size_t>(n_), 0);
    visited_[static_cast<std::size_t>(j)] = 1;
    visited_[static_cast<std::size_t>(freed)] = 0;
    path_.clear();
    if (!find_path(displaced, freed, i)) return false;
    // path_ holds (row, new column) in order along the alternating path.
    for (const auto& [r, col] : path_) {
      col_of_[static_cast<std::size_t>(r)] = col;
      row_of_[static_cast<std::size_t>(col)] = r;
    }
    col_of_[static_cast<std::size_t>(i)] = j;
    row_of_[static_cast<std::size_t>(j)] = i;
    return true;
  }

  bool find_path(int row, int target_col, int skip_row) {
    for (int col : tight_[static_cast<std::size_t>(row)]) {
      if (locked_[static_cast<std::size_t>(col)] || visited_[static_cast<std::size_t>(col)]) continue;
      visited_[static_cast<std::size_t>(col)] = 1;
      if (col == target_col) {
        path_.emplace_back(row, col);
        return true;
      }
      const int next = row_of_[static_cast<std::size_t>(col)];
      if (next == skip_row) continue;
      if (find_path(next, target_col, skip_row)) {
        path_.emplace_back(row, col);
        return true;
      }
    }
    return false;
  }

  int n_;
  std::vector<int>& col_of_;
  std::vector<int> row_of_;
  std::vector<char> locked_;
  std::vector<std::vector<int>> tight_;
  std::vector<char> visited_;
  std::vector<std::pair<int, int>> path_;
};

}  // namespace

Assignment hungarian(const CostMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("hungarian: cost matrix must be square");
  if (!m.allFinite()) throw std::invalid_argument("hungarian: cost matrix has NaN or infinite entries");
  Assignment out;
  const int n = static_cast<int>(m.rows());
  if (n == 0) return out;

  std::vector<double> u;
  std::vector<double> v;
  std::vector<int> col_of;
  solve_with_potentials(m, u, v, col_of);
  LexRefiner(m, u, v, col_of).run();

  out.pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.pairs.emplace_back(i, col_of[static_cast<std::size_t>(i)]);
    out.total_cost += m(i, col_of[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<int> nearest_matching(const CostMatrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) < m(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

LossValue paired_smooth_l1(const Contour& pred, const Contour& target, std::vector<int> target_of) {
  const Eigen::Index n = pred.size();
  if (target.size() != n) throw std::invalid_argument("contour loss: length mismatch");
  if (static_cast<Eigen::Index>(target_of.size()) != n) throw std::invalid_argument("contour loss: pairing size");
  LossValue out;
  out.grad = Points::Zero(n, 2);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = target_of[static_cast<std::size_t>(i)];
    for (int c = 0; c < 2; ++c) {
      const double d = pred.points(i, c) - target.points(j, c);
      sum += smooth_l1(d);
      out.grad(i, c) = smooth_l1_grad(d) * inv_n;
    }
  }
  out.value = sum * inv_n;
  out.target_of = std::move(target_of);
  return out;
}

std::vector<int> match_vertices(LossKind kind, const Contour& pred, const Contour& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("contour loss: length mismatch");
  switch (kind) {
    case LossKind::kDml: {
      std::vector<int> id(static_cast<std::size_t>(pred.size()));
      std::iota(id.begin(), id.end(), 0);
      return id;
    }
    case LossKind::kNnml: return nearest_matching(cost_matrix(pred, target));
    case LossKind::kObgml: return hungarian(cost_matrix(pred, target)).target_of();
  }
  throw std::invalid_argument("unknown loss kind");
}

LossValue dml_loss(const Contour& pred, const Contour& target) {
  return paired_smooth_l1(pred, target, match_vertices(LossKind::kDml, pred, target));
}

LossValue nnml_loss(const Contour& pred, const Contour& target) {
  return paired_smooth_l1(pred, target, match_vertices(LossKind::kNnml, pred, target));
}

LossValue obgml_loss(const Contour& pred, const Contour& target) {
  return paired_smooth_l1(pred, target, match_vertices(LossKind::kObgml, pred, target));
}

LossValue contour_loss(LossKind kind, const Contour& pred, const Contour& target) {
  return paired_smooth_l1(pred, target, match_vertices(kind, pred, target));
}

}  // namespace dke
