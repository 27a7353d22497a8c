#pragma once

#include <cstdint>
#include <vector>

#include "rcf/losses.hpp"
#include "rcf/planner.hpp"

namespace rcf {

struct TrainWeights {
  Scalar detection = 1.0;
  Scalar map = 0.5;
  Scalar motion = 0.5;
  Scalar plan = 1.0;
};

struct TrainConfig {
  int epochs = 40;
  std::uint64_t seed = 7;
  bool radar_enabled = true;
  int workers = 1;  // scene-level parallelism; results are worker-count invariant
  SgdConfig sgd{};
  DetectionLossWeights match{};
  TrainWeights weights{};
};

struct EpochStats {
  Scalar total = 0.0;
  Scalar detection = 0.0;
  Scalar map = 0.0;
  Scalar motion = 0.0;
  Scalar plan = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
};

// Full-batch gradient descent: every frame of every scene contributes to one
// averaged gradient per epoch. Supervision is applied at every decoder layer
// (classification + anchor regression); trajectory and plan heads are
// supervised at the final layer with winner-take-all mode selection.
TrainResult train_model(PlannerModel& model, const std::vector<std::vector<Frame>>& scenes,
                        const TrainConfig& tc);

}  // namespace rcf
