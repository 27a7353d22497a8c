#pragma once

#include "rcf/rng.hpp"
#include "rcf/types.hpp"

namespace rcf {

struct KmeansResult {
  MatX centroids;               // K x D
  std::vector<int> assignment;  // N, cluster index per input row
  Scalar inertia = 0.0;         // sum of squared distances to assigned centroid
  int iterations = 0;
};

// Lloyd's iterations until the assignment is a fixed point or 100 rounds.
// Initial centroids are K distinct rows drawn by the seeded generator; empty
// clusters are re-seeded from the point farthest from its centroid.
// Throws std::invalid_argument when rows < k or k < 1.
KmeansResult kmeans(const MatX& rows, int k, std::uint64_t seed);

// Anchor initialization: k-means over 11-parameter boxes from the training
// set; returns the K centroids.
MatX kmeans_anchors(const MatX& training_boxes, int k, std::uint64_t seed);

}  // namespace rcf
