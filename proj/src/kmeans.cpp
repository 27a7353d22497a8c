#include "rcf/kmeans.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace rcf {

namespace {

constexpr int kMaxIterations = 100;

int nearest_centroid(const MatX& centroids, const VecX& point) {
  int best = 0;
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const Scalar d = (centroids.row(c).transpose() - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

KmeansResult kmeans(const MatX& rows, int k, std::uint64_t seed) {
  const Eigen::Index n = rows.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer rows than clusters");

  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<std::uint64_t>(i)))]);
  }
  KmeansResult res;
  res.centroids.resize(k, rows.cols());
  for (int c = 0; c < k; ++c) res.centroids.row(c) = rows.row(order[static_cast<size_t>(c)]);

  res.assignment.assign(static_cast<size_t>(n), -1);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    res.iterations = iter + 1;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_centroid(res.centroids, rows.row(i).transpose());
      if (c != res.assignment[static_cast<size_t>(i)]) {
        res.assignment[static_cast<size_t>(i)] = c;
        changed = true;
      }
    }
    if (!changed) break;

    MatX sums = MatX::Zero(k, rows.cols());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<size_t>(i)]) += rows.row(i);
      counts[static_cast<size_t>(res.assignment[static_cast<size_t>(i)])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) {
        res.centroids.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
      } else {
        Eigen::Index farthest = 0;
        Scalar best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const Scalar d =
              (rows.row(i) - res.centroids.row(res.assignment[static_cast<size_t>(i)]))
                  .squaredNorm();
          if (d > best) {
            best = d;
            farthest = i;
          }
        }
        res.centroids.row(c) = rows.row(farthest);
      }
    }
  }

  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.inertia +=
        (rows.row(i) - res.centroids.row(res.assignment[static_cast<size_t>(i)])).squaredNorm();
  }
  return res;
}

MatX kmeans_anchors(const MatX& training_boxes, int k, std::uint64_t seed) {
  if (training_boxes.cols() != anchor::kDim) {
    throw std::invalid_argument("kmeans_anchors: boxes must have 11 columns");
  }
  return kmeans(training_boxes, k, seed).centroids;
}

}  // namespace rcf
