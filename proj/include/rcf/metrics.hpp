#pragma once

#include <array>
#include <map>
#include <vector>

#include "rcf/types.hpp"

namespace rcf {

// Ego footprint used for collision checks (nuScenes ego vehicle).
struct EgoFootprint {
  Scalar length = 4.08;
  Scalar width = 1.73;
};

// Everything planning metrics need from one frame. Plans are in the frame's
// ego frame; `prev_to_current` maps the previous frame's ego frame into this
// one. agent_boxes[k] holds ground-truth boxes at plan step k+1.
struct PlanningRecord {
  PointsXY plan;           // kPlanSteps x 2
  PointsXY gt_future;      // kPlanSteps x 2
  bool has_previous = false;
  PointsXY previous_plan;  // kPlanSteps x 2, previous ego frame
  Pose2D prev_to_current;
  std::vector<std::vector<OrientedBox2D>> agent_boxes;  // per step
};

// Displacement at the exact step index of each horizon (seconds, multiples
// of the 0.5 s step). Throws when a horizon exceeds the plan.
VecX l2_at_horizons(const PointsXY& plan, const PointsXY& gt_future,
                    const std::vector<Scalar>& horizons_s);

// Percentage of frames whose ego footprint, swept along the plan, overlaps
// any ground-truth agent box at any step up to each horizon.
VecX collision_rate(const std::vector<PlanningRecord>& records,
                    const std::vector<Scalar>& horizons_s, const EgoFootprint& ego = {});

// Mean displacement between the current plan and the time-shifted previous
// plan (transformed into the current frame) over the overlap window up to
// each horizon. Frames without a previous plan are skipped.
VecX tpc(const std::vector<PlanningRecord>& records, const std::vector<Scalar>& horizons_s);

struct PlanningMetrics {
  std::vector<Scalar> horizons_s;
  VecX l2, collision_pct, tpc_m;
  Scalar l2_avg = 0.0, collision_avg = 0.0, tpc_avg = 0.0;
};

PlanningMetrics planning_metrics(const std::vector<PlanningRecord>& records,
                                 const std::vector<Scalar>& horizons_s = {1.0, 2.0, 3.0},
                                 const EgoFootprint& ego = {});

// One frame of motion-forecasting predictions: per detected agent, the mode
// set plus the detection's current BEV center and score.
struct MotionRecord {
  struct Prediction {
    Vec2 center = Vec2::Zero();
    Scalar score = 0.0;
    std::vector<PointsXY> modes;  // each kMotionSteps x 2
  };
  struct GroundTruth {
    Vec2 center = Vec2::Zero();
    PointsXY future;  // kMotionSteps x 2
  };
  std::vector<Prediction> predictions;
  std::vector<GroundTruth> gts;
};

struct MotionMetrics {
  Scalar min_ade = 0.0, min_fde = 0.0, miss_rate = 0.0, epa = 0.0;
  int matched = 0, false_positives = 0, gt_count = 0;
};

// Score-ordered greedy matching by current-center distance <= threshold;
// minADE/minFDE averaged over matches, MR = fraction with minFDE > 2 m,
// EPA = (hits - 0.5 * false positives) / ground-truth count.
MotionMetrics motion_metrics(const std::vector<MotionRecord>& records,
                             Scalar match_threshold = 2.0);

struct DetectionRecord {
  struct Box {
    Vec2 center = Vec2::Zero();
    Vec3 size = Vec3::Ones();  // (w, h, l)
    Scalar yaw = 0.0;
    Vec2 velocity = Vec2::Zero();
    int class_id = 0;
    Scalar score = 1.0;
  };
  std::vector<Box> predictions;
  std::vector<Box> gts;
};

struct DetectionMetrics {
  Scalar mean_ap = 0.0;
  Scalar mate = 0.0, mase = 0.0, maoe = 0.0, mave = 0.0, maae = 0.0;
  std::map<int, Scalar> ap_per_class;  // averaged over thresholds
};

// Center-distance AP averaged over classes and thresholds (101-point
// interpolated precision, recall > 0.1 region, normalized by 0.9); true
// positive errors from a class-agnostic 2 m greedy match.
DetectionMetrics detection_map(const std::vector<DetectionRecord>& records,
                               const std::vector<Scalar>& dist_thresholds = {0.5, 1.0, 2.0, 4.0});

// Composite score: (5 * mAP + sum of (1 - min(1, err))) / 10.
Scalar nds(Scalar mean_ap, const std::array<Scalar, 5>& tp_errors);
Scalar nds(const DetectionMetrics& m);

}  // namespace rcf
