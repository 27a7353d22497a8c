#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately brute force and shares no code with src/.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "rcf/metrics.hpp"
#include "rcf/types.hpp"

namespace oracle {

using rcf::MatX;
using rcf::PointsXY;
using rcf::Scalar;
using rcf::Vec2;
using rcf::VecX;

// Minimum distance from p to a polyline by dense sampling along every segment.
inline Scalar dense_polyline_distance(const Vec2& p, const PointsXY& wp, int samples_per_seg) {
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index s = 0; s + 1 < wp.rows(); ++s) {
    const Vec2 a = wp.row(s);
    const Vec2 b = wp.row(s + 1);
    for (int i = 0; i <= samples_per_seg; ++i) {
      const Scalar t = static_cast<Scalar>(i) / samples_per_seg;
      best = std::min(best, (p - (a + t * (b - a))).norm());
    }
  }
  return best;
}

// --- Convex polygon intersection (Sutherland-Hodgman) ---

inline std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, const Vec2& a,
                                         const Vec2& b) {
  std::vector<Vec2> out;
  const auto side = [&](const Vec2& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  };
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& nxt = poly[(i + 1) % n];
    const Scalar sc = side(cur), sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
      const Scalar t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

inline Scalar polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  Scalar acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(acc);
}

inline std::vector<Vec2> box_corners_ccw(const rcf::OrientedBox2D& box) {
  const auto c = box.corners();
  std::vector<Vec2> out;
  for (int i = 0; i < 4; ++i) out.push_back(c.row(i));
  // corners() may come in either winding; force counter-clockwise.
  Scalar twice = 0.0;
  for (size_t i = 0; i < 4; ++i) {
    twice += out[i].x() * out[(i + 1) % 4].y() - out[(i + 1) % 4].x() * out[i].y();
  }
  if (twice < 0.0) std::reverse(out.begin(), out.end());
  return out;
}

// Exact intersection area of two oriented rectangles.
inline Scalar box_intersection_area(const rcf::OrientedBox2D& a, const rcf::OrientedBox2D& b) {
  std::vector<Vec2> poly = box_corners_ccw(a);
  const std::vector<Vec2> clip = box_corners_ccw(b);
  for (size_t i = 0; i < clip.size() && !poly.empty(); ++i) {
    poly = clip_half_plane(poly, clip[i], clip[(i + 1) % clip.size()]);
  }
  return polygon_area(poly);
}

// --- Exhaustive assignment ---

struct BruteMatch {
  std::vector<std::pair<int, int>> pairs;
  Scalar cost = 0.0;
};

// Minimum-cost injective assignment of min(N, M) pairs by full enumeration.
// Ties resolve to the lexicographically smallest row-sorted pair list.
inline BruteMatch brute_force_match(const MatX& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const bool rows_small = n <= m;
  const int small = rows_small ? n : m;
  const int large = rows_small ? m : n;
  BruteMatch best;
  best.cost = std::numeric_limits<Scalar>::infinity();
  std::vector<int> pick(static_cast<size_t>(small));
  std::vector<char> used(static_cast<size_t>(large), 0);
  const std::function<void(int, Scalar)> rec = [&](int i, Scalar acc) {
    if (i == small) {
      std::vector<std::pair<int, int>> pairs;
      for (int k = 0; k < small; ++k) {
        pairs.emplace_back(rows_small ? k : pick[static_cast<size_t>(k)],
                           rows_small ? pick[static_cast<size_t>(k)] : k);
      }
      std::sort(pairs.begin(), pairs.end());
      if (acc < best.cost - 1e-12 ||
          (std::abs(acc - best.cost) <= 1e-12 && pairs < best.pairs)) {
        best.cost = std::min(acc, best.cost);
        best.pairs = pairs;
      }
      return;
    }
    for (int j = 0; j < large; ++j) {
      if (used[static_cast<size_t>(j)]) continue;
      used[static_cast<size_t>(j)] = 1;
      pick[static_cast<size_t>(i)] = j;
      rec(i + 1, acc + (rows_small ? cost(i, j) : cost(j, i)));
      used[static_cast<size_t>(j)] = 0;
    }
  };
  rec(0, 0.0);
  return best;
}

// --- Attention reference ---

inline MatX naive_range_attention(const MatX& q, const MatX& k, const MatX& v, const MatX& dist,
                                  Scalar alpha, Scalar r_max, int heads) {
  const Eigen::Index d = q.cols() / heads;
  MatX out(q.rows(), v.cols() / heads * heads);
  out.setZero();
  const Eigen::Index dv = v.cols() / heads;
  for (int h = 0; h < heads; ++h) {
    const MatX qh = q.middleCols(h * d, d);
    const MatX kh = k.middleCols(h * d, d);
    const MatX vh = v.middleCols(h * dv, dv);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      VecX logits(k.rows());
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        logits(j) = qh.row(i).dot(kh.row(j)) / std::sqrt(static_cast<Scalar>(d)) -
                    alpha * dist(i, j) / r_max;
      }
      const Scalar mx = logits.maxCoeff();
      VecX w = (logits.array() - mx).exp();
      w /= w.sum();
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        out.row(i).segment(h * dv, dv) += w(j) * vh.row(j);
      }
    }
  }
  return out;
}

// --- Convex hull and containment (for the rasterization oracle) ---

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) k--;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool point_in_convex(const std::vector<Vec2>& hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  int sign = 0;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const Scalar c = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (std::abs(c) < 1e-12) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

// --- k-means global optimum for k = 2 ---

inline Scalar best_bipartition_inertia(const MatX& rows) {
  const int n = static_cast<int>(rows.rows());
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    VecX mean_a = VecX::Zero(rows.cols());
    VecX mean_b = VecX::Zero(rows.cols());
    int na = 0, nb = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        mean_a += rows.row(i).transpose();
        na++;
      } else {
        mean_b += rows.row(i).transpose();
        nb++;
      }
    }
    mean_a /= na;
    mean_b /= nb;
    Scalar cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const VecX& c = (mask & (1u << i)) ? mean_a : mean_b;
      cost += (rows.row(i).transpose() - c).squaredNorm();
    }
    best = std::min(best, cost);
  }
  return best;
}

// --- Detection mAP reference ---

// Interpolated average precision from raw (score, tp) samples: for each grid
// recall r in {0.11 .. 1.00}, take the maximum precision over all curve
// points with recall >= r, subtract 0.1, clamp, average, renormalize.
inline Scalar ap_from_samples(std::vector<std::pair<Scalar, bool>> samples, int num_gt) {
  if (num_gt == 0 || samples.empty()) return 0.0;
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Scalar> recall, precision;
  int tp = 0, fp = 0;
  for (const auto& s : samples) {
    if (s.second) tp++; else fp++;
    recall.push_back(static_cast<Scalar>(tp) / num_gt);
    precision.push_back(static_cast<Scalar>(tp) / (tp + fp));
  }
  Scalar total = 0.0;
  for (int i = 11; i <= 100; ++i) {
    const Scalar r = 0.01 * i;
    Scalar p = 0.0;
    for (size_t k = 0; k < recall.size(); ++k) {
      if (recall[k] >= r - 1e-12) p = std::max(p, precision[k]);
    }
    total += std::max(0.0, p - 0.1);
  }
  return total / 90.0 / 0.9;
}

// Mean AP over class x threshold with per-frame greedy nearest-center
// matching, written independently of the library implementation.
inline Scalar reference_mean_ap(const std::vector<rcf::DetectionRecord>& records,
                                const std::vector<Scalar>& thresholds) {
  std::set<int> classes;
  for (const auto& rec : records) {
    for (const auto& g : rec.gts) classes.insert(g.class_id);
    for (const auto& p : rec.predictions) classes.insert(p.class_id);
  }
  if (classes.empty()) return 0.0;
  Scalar total = 0.0;
  int terms = 0;
  for (int cls : classes) {
    for (Scalar thr : thresholds) {
      std::vector<std::pair<Scalar, bool>> samples;
      int num_gt = 0;
      for (const auto& rec : records) {
        for (const auto& g : rec.gts) {
          if (g.class_id == cls) num_gt++;
        }
        std::vector<size_t> idx;
        for (size_t i = 0; i < rec.predictions.size(); ++i) {
          if (rec.predictions[i].class_id == cls) idx.push_back(i);
        }
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
          return rec.predictions[a].score > rec.predictions[b].score;
        });
        std::vector<bool> used(rec.gts.size(), false);
        for (size_t i : idx) {
          int pick = -1;
          Scalar pick_d = thr;
          for (size_t g = 0; g < rec.gts.size(); ++g) {
            if (used[g] || rec.gts[g].class_id != cls) continue;
            const Scalar d = (rec.predictions[i].center - rec.gts[g].center).norm();
            if (d <= pick_d) {
              pick_d = d;
              pick = static_cast<int>(g);
            }
          }
          if (pick >= 0) used[static_cast<size_t>(pick)] = true;
          samples.emplace_back(rec.predictions[i].score, pick >= 0);
        }
      }
      total += ap_from_samples(std::move(samples), num_gt);
      terms++;
    }
  }
  return total / terms;
}

}  // namespace oracle
