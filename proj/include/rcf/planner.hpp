#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rcf/decoder.hpp"
#include "rcf/params.hpp"
#include "rcf/types.hpp"

namespace rcf {

// Trained pipeline: configuration, parameter store, and k-means anchor
// initializations for agents (11-dim boxes) and maps (flattened waypoints).
struct PlannerModel {
  FusionConfig cfg;
  ParamStore params;
  MatX agent_anchor_init;  // num_agent_anchors x 11
  MatX map_anchor_init;    // num_map_anchors x (2 * map_waypoints)
};

// Registers every trainable tensor for the configuration.
void init_model_params(PlannerModel& model, std::uint64_t seed);

// Anchor initialization from training ground truth (k-means over boxes and
// flattened resampled polylines; inputs are padded with seeded jitter when
// fewer than K samples exist) plus parameter initialization.
PlannerModel make_model(const FusionConfig& cfg, const std::vector<std::vector<Frame>>& scenes,
                        std::uint64_t seed);

// Streaming state across a scene's frames.
struct PlannerState {
  struct MemoryEntry {
    std::vector<AgentInstance> instances;  // that frame's top detections
    Pose2D ego_pose;                       // world frame at capture time
  };
  std::vector<MemoryEntry> memory;  // <= 3, oldest first
  bool use_memory = true;           // instance carryover (evaluation-time)
  bool has_prev_plan = false;
  PointsXY prev_plan;
  Pose2D prev_pose;
};

constexpr int kMemoryFrames = 3;

// Instances carried from memory into the anchor set (replacing the trailing
// slots): at most 64 and at most a quarter of the anchor budget.
int memory_carry_count(const FusionConfig& cfg);

struct PipelineOutput {
  std::vector<AgentInstance> detections;
  std::vector<MapPolyline> map;
  std::vector<TrajectorySet> agent_futures;              // per detection
  std::array<TrajectorySet, kNumCommands> ego_modes;     // re-scored
  Trajectory ego_plan;
};

// Differentiable outputs of one frame; anchors/waypoints per layer come from
// LayerOutputT, trajectory heads read the final layer's features.
struct FrameRunT {
  std::vector<LayerOutputT> layers;
  Var agent_traj_disp;    // N_a x (modes * 2 * motion_steps)
  Var agent_traj_logits;  // N_a x modes
  std::array<Var, kNumCommands> plan_disp;    // 1 x (modes * 2 * plan_steps)
  std::array<Var, kNumCommands> plan_logits;  // 1 x modes
  MatX agent_anchors_in;  // anchors fed to layer 0 (after memory merge)
};

// Optional feature carryover for memory-merged anchor slots.
struct CarriedFeatures {
  std::vector<int> rows;
  MatX features;  // |rows| x C
};

// Full differentiable pipeline for one frame: radar encoding, frustum
// enrichment of the camera grids, L decoder layers, trajectory and plan
// heads. radar_enabled=false is identical to a frame without radar points.
FrameRunT run_frame_t(Tape& tape, ParamBinding& params, const Frame& frame,
                      const MatX& agent_anchors, const MatX& map_anchors,
                      const FusionConfig& cfg, bool radar_enabled,
                      const CarriedFeatures* carried = nullptr);

// Plain inference wrapper with memory-queue merge and update, trajectory
// materialization, proximity re-scoring, and command-conditioned selection.
PipelineOutput run_frame(const Frame& frame, PlannerState& state, const PlannerModel& model,
                         bool radar_enabled);

// Cumulative-sum trajectory head: displacement and score tensors live under
// "<prefix>traj.*" and "<prefix>score.*"; modes start at the anchor's BEV
// position, scores are softmax-normalized.
TrajectorySet trajectory_head(const VecX& feature, const Vec11& anchor, const ParamStore& params,
                              const std::string& prefix, int horizon, int num_modes);

// score' = score - lambda * sum_t max(0, r_safe - d_t); d_t is the distance
// at step t to the nearest agent (each agent contributes its highest-scored
// mode). Trajectories are unchanged, only scores move.
TrajectorySet rescore_trajectories(const TrajectorySet& ego_modes,
                                   const std::vector<TrajectorySet>& agent_futures,
                                   Scalar lambda = 1.0, Scalar r_safe = 3.0);

// Highest-scored mode of the commanded set; ties break to the lowest index.
// Throws when the set is empty.
Trajectory select_plan(const std::array<TrajectorySet, kNumCommands>& modes,
                       DrivingCommand command);

// Materializes a displacement row (modes x 2H flattened) into trajectories
// via cumulative sums from `origin`.
TrajectorySet displacements_to_trajectories(const VecX& disp_row, const VecX& score_logits,
                                            const Vec2& origin, int horizon, int num_modes);

}  // namespace rcf
