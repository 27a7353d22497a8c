#include "rcf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcf {

Scalar ade(const PointsXY& pred, const PointsXY& gt) {
  if (pred.rows() != gt.rows()) throw std::invalid_argument("ade: length mismatch");
  if (pred.rows() == 0) return 0.0;
  Scalar acc = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) acc += (pred.row(i) - gt.row(i)).norm();
  return acc / pred.rows();
}

Scalar fde(const PointsXY& pred, const PointsXY& gt) {
  if (pred.rows() != gt.rows()) throw std::invalid_argument("fde: length mismatch");
  if (pred.rows() == 0) return 0.0;
  return (pred.row(pred.rows() - 1) - gt.row(gt.rows() - 1)).norm();
}

Scalar focal_loss(const VecX& mode_scores, int positive_index, Scalar gamma, Scalar weight) {
  if (positive_index < 0 || positive_index >= mode_scores.size()) {
    throw std::invalid_argument("focal_loss: positive index out of range");
  }
  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < mode_scores.size(); ++i) {
    const Scalar p = mode_scores(i);
    if (!(p > 0.0 && p <= 1.0) || !std::isfinite(p)) {
      throw std::invalid_argument("focal_loss: scores must lie in (0, 1]");
    }
    total += p;
  }
  if (total > 1.0 + 1e-6) {
    throw std::invalid_argument("focal_loss: scores must be normalized (sum <= 1)");
  }
  const Scalar p_pos = mode_scores(positive_index);
  Scalar loss = -weight * std::pow(1.0 - p_pos, gamma) * std::log(p_pos);
  for (Eigen::Index i = 0; i < mode_scores.size(); ++i) {
    if (i == positive_index) continue;
    const Scalar p = mode_scores(i);
    loss -= (1.0 - weight) * std::pow(p, gamma) * std::log(std::max(1e-12, 1.0 - p));
  }
  return loss;
}

Scalar l1_trajectory_loss(const PointsXY& pred, const PointsXY& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw std::invalid_argument("l1_trajectory_loss: shape mismatch");
  }
  if (pred.size() == 0) return 0.0;
  return (pred - gt).cwiseAbs().mean();
}

namespace {

// Shortest-augmenting-path assignment for n rows <= m columns; every row is
// matched. col_of_row is filled with the optimal column per row; u, v carry
// the optimal dual potentials.
void solve_rect_assignment(const MatX& cost, std::vector<int>& col_of_row, std::vector<Scalar>& u,
                           std::vector<Scalar>& v) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  u.assign(n + 1, 0.0);
  v.assign(m + 1, 0.0);
  std::vector<int> way(m + 1, 0);
  std::vector<int> row_of_col(m + 1, n);  // n = free marker
  for (int i = 0; i < n; ++i) {
    int j0 = m;  // virtual free column
    row_of_col[m] = i;
    std::vector<Scalar> minv(m + 1, std::numeric_limits<Scalar>::infinity());
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = row_of_col[j0];
      Scalar delta = std::numeric_limits<Scalar>::infinity();
      int j1 = -1;
      for (int j = 0; j < m; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != n);
    do {
      const int j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != m);
  }
  col_of_row.assign(n, -1);
  for (int j = 0; j < m; ++j) {
    if (row_of_col[j] != n) col_of_row[row_of_col[j]] = j;
  }
}

// Kuhn matching over the tight-edge graph restricted to columns >= from.
bool try_augment(int row, const std::vector<std::vector<int>>& tight, std::vector<int>& match_col,
                 std::vector<char>& visited) {
  for (int j : tight[row]) {
    if (visited[j]) continue;
    visited[j] = 1;
    if (match_col[j] < 0 || try_augment(match_col[j], tight, match_col, visited)) {
      match_col[j] = row;
      return true;
    }
  }
  return false;
}

bool perfect_matching_exists(const std::vector<std::vector<int>>& tight, int n, int m,
                             const std::vector<int>& forced) {
  std::vector<int> match_col(m, -1);
  for (int i = 0; i < n; ++i) {
    if (forced[i] >= 0) {
      if (match_col[forced[i]] >= 0) return false;
      match_col[forced[i]] = i;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (forced[i] >= 0) continue;
    std::vector<char> visited(m, 0);
    for (int k = 0; k < n; ++k) {
      if (forced[k] >= 0) visited[forced[k]] = 1;
    }
    if (!try_augment(i, tight, match_col, visited)) return false;
  }
  return true;
}

}  // namespace

MatchResult hungarian_match(const MatX& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("hungarian_match: non-finite cost entries");
  const int np = static_cast<int>(cost.rows());
  const int ng = static_cast<int>(cost.cols());
  MatchResult res;
  if (np == 0 || ng == 0) return res;

  // Pad to square with zero-cost dummies. On the square problem every
  // perfect matching over tight edges costs exactly sum(u) + sum(v), so the
  // tight graph certifies optimality; on the raw rectangle it does not,
  // because unmatched columns carry varying potentials.
  const int s = std::max(np, ng);
  MatX work = MatX::Zero(s, s);
  work.topLeftCorner(np, ng) = cost;

  std::vector<int> col_of_row;
  std::vector<Scalar> u, v;
  solve_rect_assignment(work, col_of_row, u, v);

  constexpr Scalar kTightEps = 1e-9;
  std::vector<std::vector<int>> tight(s);
  bool ambiguous = false;
  for (int i = 0; i < s; ++i) {
    int tight_real = 0;
    bool tight_dummy = false;
    for (int j = 0; j < s; ++j) {
      if (work(i, j) - u[i] - v[j] <= kTightEps) {
        tight[i].push_back(j);
        if (j < ng) {
          ++tight_real;
        } else {
          tight_dummy = true;
        }
      }
    }
    // Ties among dummy columns are interchangeable; only a choice between
    // real columns, or real versus unmatched, can change the pair list.
    if (i < np && (tight_real > 1 || (tight_real == 1 && tight_dummy))) ambiguous = true;
  }

  // Lexicographic canonicalization over equal-cost assignments: force each
  // prediction row, in order, to its smallest tight column that still
  // admits a perfect matching of the padded square.
  std::vector<int> forced(s, -1);
  if (!ambiguous) {
    forced = col_of_row;
  } else {
    for (int i = 0; i < np; ++i) {
      for (int j : tight[i]) {
        forced[i] = j;
        if (perfect_matching_exists(tight, s, s, forced)) break;
        forced[i] = -1;
      }
      if (forced[i] < 0) forced[i] = col_of_row[i];  // numerical fallback
    }
  }

  res.total_cost = 0.0;
  for (int i = 0; i < np; ++i) {
    const int j = forced[i];
    if (j >= ng) continue;  // matched to a dummy column: unpaired prediction
    res.total_cost += cost(i, j);
    res.pairs.emplace_back(i, j);
  }
  std::sort(res.pairs.begin(), res.pairs.end());
  return res;
}

DetectionLossBreakdown detection_loss(const std::vector<AgentInstance>& preds,
                                      const std::vector<GtAgent>& gts,
                                      const DetectionLossWeights& w) {
  DetectionLossBreakdown out;
  if (!preds.empty() && !gts.empty()) {
    MatX cost(static_cast<Eigen::Index>(preds.size()), static_cast<Eigen::Index>(gts.size()));
    for (size_t i = 0; i < preds.size(); ++i) {
      for (size_t j = 0; j < gts.size(); ++j) {
        const Scalar p = preds[i].class_scores(gts[j].class_id);
        const Scalar l1 = (preds[i].anchor - gts[j].anchor).cwiseAbs().mean();
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            w.class_cost * (1.0 - p) + w.l1_cost * l1;
      }
    }
    out.matches = hungarian_match(cost).pairs;
  }

  std::vector<int> gt_of_pred(preds.size(), -1);
  for (const auto& [pi, gi] : out.matches) gt_of_pred[static_cast<size_t>(pi)] = gi;

  // Per-class sigmoid focal over every prediction.
  Scalar cls = 0.0;
  const int num_classes = preds.empty() ? 0 : static_cast<int>(preds[0].class_scores.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    const int pos = gt_of_pred[i] >= 0 ? gts[static_cast<size_t>(gt_of_pred[i])].class_id : -1;
    for (int c = 0; c < num_classes; ++c) {
      const Scalar p = std::min(1.0 - 1e-12, std::max(1e-12, preds[i].class_scores(c)));
      if (c == pos) {
        cls -= w.focal_weight * std::pow(1.0 - p, w.focal_gamma) * std::log(p);
      } else {
        cls -= (1.0 - w.focal_weight) * std::pow(p, w.focal_gamma) * std::log(1.0 - p);
      }
    }
  }
  const Scalar norm = std::max<size_t>(1, out.matches.size());
  out.classification = cls / norm;

  Scalar reg = 0.0;
  for (const auto& [pi, gi] : out.matches) {
    reg += (preds[static_cast<size_t>(pi)].anchor - gts[static_cast<size_t>(gi)].anchor)
               .cwiseAbs()
               .mean();
  }
  out.regression = out.matches.empty() ? 0.0 : reg / out.matches.size();
  out.total = out.classification + w.regression_weight * out.regression;
  return out;
}

}  // namespace rcf
