#pragma once

#include <utility>
#include <vector>

#include "rcf/types.hpp"

namespace rcf {

// Mean Euclidean displacement per timestep; throws on length mismatch.
Scalar ade(const PointsXY& pred, const PointsXY& gt);
Scalar fde(const PointsXY& pred, const PointsXY& gt);

// Focal loss over normalized mode probabilities: the positive mode
// contributes -weight * (1-p)^gamma * ln(p), each negative mode
// -(1-weight) * p^gamma * ln(1-p). Throws when scores are outside (0,1]
// or their sum exceeds 1 beyond tolerance, or the index is out of range.
Scalar focal_loss(const VecX& mode_scores, int positive_index, Scalar gamma = 2.0,
                  Scalar weight = 0.25);

// Mean absolute error over all coordinates; throws on shape mismatch.
Scalar l1_trajectory_loss(const PointsXY& pred, const PointsXY& gt);

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (prediction, ground truth), row-sorted
  Scalar total_cost = 0.0;
};

// Minimum-cost one-to-one assignment of min(N_pred, N_gt) pairs (shortest
// augmenting path). Ties between equal-cost assignments resolve to the
// lexicographically smallest pair list. Throws on non-finite entries.
MatchResult hungarian_match(const MatX& cost);

struct DetectionLossWeights {
  Scalar class_cost = 2.0;   // matching-cost weight on (1 - p_gt_class)
  Scalar l1_cost = 0.25;     // matching-cost weight on mean |anchor delta|
  Scalar focal_gamma = 2.0;
  Scalar focal_weight = 0.25;
  Scalar regression_weight = 1.0;
};

struct DetectionLossBreakdown {
  Scalar classification = 0.0;
  Scalar regression = 0.0;
  Scalar total = 0.0;
  std::vector<std::pair<int, int>> matches;
};

// Hungarian-matched detection loss: per-class sigmoid focal over all
// predictions (matched prediction positive at its ground-truth class) plus
// mean-absolute anchor regression over matched pairs.
DetectionLossBreakdown detection_loss(const std::vector<AgentInstance>& preds,
                                      const std::vector<GtAgent>& gts,
                                      const DetectionLossWeights& weights = {});

}  // namespace rcf
