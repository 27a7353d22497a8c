#include "rcf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rcf/encoder.hpp"
#include "rcf/fusion.hpp"
#include "rcf/geometry.hpp"
#include "rcf/kmeans.hpp"

namespace rcf {

namespace {

constexpr Scalar kRescoreScoreThreshold = 0.3;

// Feature-embedding input scaling per anchor column.
VecX anchor_input_scale(Scalar r_max) {
  Vec11 s;
  s << 1.0 / r_max, 1.0 / r_max, 1.0 / r_max, 0.2, 0.2, 0.2, 1.0, 1.0, 0.1, 0.1, 0.1;
  return s;
}

MatX scaled_anchor_inputs(const MatX& anchors, Scalar r_max) {
  const VecX s = anchor_input_scale(r_max);
  MatX out = anchors;
  for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) *= s(c);
  return out;
}

std::string plan_prefix(int command) { return "plan" + std::to_string(command) + "."; }

}  // namespace

int memory_carry_count(const FusionConfig& cfg) {
  return std::min(64, cfg.num_agent_anchors / 4);
}

void init_model_params(PlannerModel& model, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xA11));
  const FusionConfig& cfg = model.cfg;
  const int c = cfg.embed_dim;
  const Scalar s = 1.0 / std::sqrt(static_cast<Scalar>(c));

  init_encoder_params(model.params, c, rng);
  init_frustum_params(model.params, c, rng);
  init_decoder_params(model.params, cfg, rng);

  model.params.init_normal("emb.agent.w", anchor::kDim, c, rng, 0.3);
  model.params.create("emb.agent.b", 1, c);
  model.params.init_normal("emb.map.w", 2 * cfg.map_waypoints, c, rng, 0.3);
  model.params.create("emb.map.b", 1, c);

  model.params.init_normal("ego.proj.w", c, c, rng, s);
  model.params.create("ego.proj.b", 1, c);
  for (const char* n : {"ego.att.wq", "ego.att.wk", "ego.att.wv"}) {
    model.params.init_normal(n, c, c, rng, s);
  }
  model.params.init_normal("ego.att.wo", c, c, rng, 0.5 * s);

  model.params.init_normal("agmotion.traj.w", c, cfg.num_modes * 2 * cfg.motion_steps, rng, 0.01);
  model.params.create("agmotion.traj.b", 1, cfg.num_modes * 2 * cfg.motion_steps);
  model.params.init_normal("agmotion.score.w", c, cfg.num_modes, rng, 0.1);
  model.params.create("agmotion.score.b", 1, cfg.num_modes);
  for (int cmd = 0; cmd < kNumCommands; ++cmd) {
    const std::string p = plan_prefix(cmd);
    model.params.init_normal(p + "traj.w", c, cfg.num_modes * 2 * cfg.plan_steps, rng, 0.01);
    model.params.create(p + "traj.b", 1, cfg.num_modes * 2 * cfg.plan_steps);
    model.params.init_normal(p + "score.w", c, cfg.num_modes, rng, 0.1);
    model.params.create(p + "score.b", 1, cfg.num_modes);
  }
}

namespace {

MatX pad_rows_with_jitter(const MatX& rows, int k, Rng& rng) {
  if (rows.rows() >= k) return rows;
  MatX out(k, rows.cols());
  for (int i = 0; i < k; ++i) {
    if (i < rows.rows()) {
      out.row(i) = rows.row(i);
    } else {
      out.row(i) = rows.row(i % std::max<Eigen::Index>(1, rows.rows()));
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) += 0.05 * rng.normal();
    }
  }
  return out;
}

}  // namespace

PlannerModel make_model(const FusionConfig& cfg, const std::vector<std::vector<Frame>>& scenes,
                        std::uint64_t seed) {
  PlannerModel model;
  model.cfg = cfg;
  Rng rng(derive_seed(seed, 0xA12));

  std::vector<Vec11> boxes;
  std::vector<VecX> map_rows;
  for (const auto& scene : scenes) {
    for (const auto& frame : scene) {
      for (const auto& gt : frame.gt_agents) boxes.push_back(gt.anchor);
      for (const auto& gt : frame.gt_map) {
        const PointsXY rs = resample_polyline(gt.waypoints, cfg.map_waypoints);
        VecX flat(2 * cfg.map_waypoints);
        for (int w = 0; w < cfg.map_waypoints; ++w) {
          flat(2 * w) = rs(w, 0);
          flat(2 * w + 1) = rs(w, 1);
        }
        map_rows.push_back(flat);
      }
    }
  }
  if (boxes.empty()) {
    Vec11 a = Vec11::Zero();
    a[anchor::kX] = 10.0;
    a[anchor::kW] = 1.9;
    a[anchor::kH] = 1.6;
    a[anchor::kL] = 4.5;
    a[anchor::kCosYaw] = 1.0;
    boxes.push_back(a);
  }
  if (map_rows.empty()) {
    VecX flat(2 * cfg.map_waypoints);
    for (int w = 0; w < cfg.map_waypoints; ++w) {
      flat(2 * w) = -20.0 + 40.0 * w / (cfg.map_waypoints - 1);
      flat(2 * w + 1) = 3.5;
    }
    map_rows.push_back(flat);
  }

  MatX box_mat(static_cast<Eigen::Index>(boxes.size()), anchor::kDim);
  for (size_t i = 0; i < boxes.size(); ++i) box_mat.row(static_cast<Eigen::Index>(i)) = boxes[i].transpose();
  box_mat = pad_rows_with_jitter(box_mat, cfg.num_agent_anchors, rng);
  model.agent_anchor_init = kmeans_anchors(box_mat, cfg.num_agent_anchors, derive_seed(seed, 0xA13));
  normalize_yaw(model.agent_anchor_init);

  MatX map_mat(static_cast<Eigen::Index>(map_rows.size()), 2 * cfg.map_waypoints);
  for (size_t i = 0; i < map_rows.size(); ++i) map_mat.row(static_cast<Eigen::Index>(i)) = map_rows[i].transpose();
  map_mat = pad_rows_with_jitter(map_mat, cfg.num_map_anchors, rng);
  model.map_anchor_init = kmeans(map_mat, cfg.num_map_anchors, derive_seed(seed, 0xA14)).centroids;

  init_model_params(model, seed);
  return model;
}

FrameRunT run_frame_t(Tape& tape, ParamBinding& params, const Frame& frame,
                      const MatX& agent_anchors, const MatX& map_anchors,
                      const FusionConfig& cfg, bool radar_enabled,
                      const CarriedFeatures* carried) {
  static const std::vector<RadarPoint> kNoRadar;
  const std::vector<RadarPoint>& points = radar_enabled ? frame.radar_points : kNoRadar;
  const bool has_radar = !points.empty();

  Var radar_feats{};
  MatX radar_pos(0, 3);
  if (has_radar) {
    radar_feats = encode_radar_points_t(tape, params, points, cfg.r_max);
    radar_pos = radar_positions(points);
  }

  std::vector<Var> grids;
  for (const FeatureGrid& g : frame.camera_features) grids.push_back(tape.constant(g.values));
  if (has_radar && !grids.empty()) {
    grids = frustum_cross_attention_t(tape, params, grids, radar_feats, radar_pos, frame.cameras,
                                      frame.camera_features, cfg);
  }

  Var fa = tanh_op(linear(tape.constant(scaled_anchor_inputs(agent_anchors, cfg.r_max)),
                          params("emb.agent.w"), params("emb.agent.b")));
  if (carried != nullptr && !carried->rows.empty()) {
    MatX delta = carried->features;
    const MatX& cur = fa.value();
    for (size_t i = 0; i < carried->rows.size(); ++i) {
      delta.row(static_cast<Eigen::Index>(i)) -= cur.row(carried->rows[i]);
    }
    fa = scatter_rows_add(fa, tape.constant(delta), carried->rows);
  }
  Var fm = tanh_op(linear(tape.constant(MatX(map_anchors / cfg.r_max)), params("emb.map.w"),
                          params("emb.map.b")));

  FrameRunT out;
  out.agent_anchors_in = agent_anchors;
  MatX anchors_val = agent_anchors;
  MatX wps_val = map_anchors;
  for (int l = 0; l < cfg.num_decoder_layers; ++l) {
    LayerOutputT lo = decoder_layer_t(tape, params, l, fa, anchors_val, fm, wps_val,
                                      has_radar ? &radar_feats : nullptr, radar_pos, grids,
                                      frame.camera_features, frame.cameras, cfg);
    fa = lo.agent_features;
    fm = lo.map_features;
    anchors_val = lo.agent_anchors.value();
    normalize_yaw(anchors_val);
    wps_val = lo.map_waypoints.value();
    out.layers.push_back(std::move(lo));
  }

  out.agent_traj_disp = linear(fa, params("agmotion.traj.w"), params("agmotion.traj.b"));
  out.agent_traj_logits = linear(fa, params("agmotion.score.w"), params("agmotion.score.b"));

  Var ego0 = ego_query_init_t(tape, grids);
  Var ego = layernorm_rows(linear(ego0, params("ego.proj.w"), params("ego.proj.b")));
  {
    Var ctx = fm.value().rows() > 0 ? vcat({fa, fm}) : fa;
    Var q = matmul(ego, params("ego.att.wq"));
    Var k = matmul(ctx, params("ego.att.wk"));
    Var v = matmul(ctx, params("ego.att.wv"));
    const MatX zero_dist = MatX::Zero(1, ctx.value().rows());
    Var att = range_attention(q, k, v, tape.constant(0.0), zero_dist, cfg.r_max, cfg.num_heads);
    ego = layernorm_rows(add(ego, matmul(att, params("ego.att.wo"))));
  }
  for (int cmd = 0; cmd < kNumCommands; ++cmd) {
    const std::string p = plan_prefix(cmd);
    out.plan_disp[static_cast<size_t>(cmd)] =
        linear(ego, params(p + "traj.w"), params(p + "traj.b"));
    out.plan_logits[static_cast<size_t>(cmd)] =
        linear(ego, params(p + "score.w"), params(p + "score.b"));
  }
  return out;
}

TrajectorySet displacements_to_trajectories(const VecX& disp_row, const VecX& score_logits,
                                            const Vec2& origin, int horizon, int num_modes) {
  if (disp_row.size() != num_modes * 2 * horizon) {
    throw std::invalid_argument("displacements_to_trajectories: row size mismatch");
  }
  VecX scores = score_logits;
  const Scalar m = scores.maxCoeff();
  scores = (scores.array() - m).exp();
  scores /= scores.sum();

  TrajectorySet set;
  for (int mode = 0; mode < num_modes; ++mode) {
    Trajectory traj;
    traj.points.resize(horizon, 2);
    Vec2 p = origin;
    for (int k = 0; k < horizon; ++k) {
      p.x() += disp_row(mode * 2 * horizon + 2 * k);
      p.y() += disp_row(mode * 2 * horizon + 2 * k + 1);
      traj.points.row(k) = p.transpose();
    }
    traj.score = scores(mode);
    set.modes.push_back(std::move(traj));
  }
  return set;
}

TrajectorySet trajectory_head(const VecX& feature, const Vec11& anchor, const ParamStore& params,
                              const std::string& prefix, int horizon, int num_modes) {
  const MatX& tw = params.at(prefix + "traj.w");
  const MatX& tb = params.at(prefix + "traj.b");
  const MatX& sw = params.at(prefix + "score.w");
  const MatX& sb = params.at(prefix + "score.b");
  const VecX disp = (feature.transpose() * tw + tb).transpose();
  const VecX logits = (feature.transpose() * sw + sb).transpose();
  return displacements_to_trajectories(disp, logits, anchor.segment<2>(anchor::kX), horizon,
                                       num_modes);
}

TrajectorySet rescore_trajectories(const TrajectorySet& ego_modes,
                                   const std::vector<TrajectorySet>& agent_futures,
                                   Scalar lambda, Scalar r_safe) {
  // Each agent contributes its highest-scored mode.
  std::vector<const Trajectory*> agent_best;
  for (const auto& set : agent_futures) {
    const Trajectory* best = nullptr;
    for (const auto& mode : set.modes) {
      if (best == nullptr || mode.score > best->score) best = &mode;
    }
    if (best != nullptr) agent_best.push_back(best);
  }

  TrajectorySet out = ego_modes;
  if (agent_best.empty()) return out;
  for (auto& mode : out.modes) {
    Scalar penalty = 0.0;
    for (Eigen::Index k = 0; k < mode.points.rows(); ++k) {
      Scalar d = std::numeric_limits<Scalar>::infinity();
      for (const Trajectory* agent : agent_best) {
        if (k < agent->points.rows()) {
          d = std::min(d, (mode.points.row(k) - agent->points.row(k)).norm());
        }
      }
      if (std::isfinite(d)) penalty += std::max(0.0, r_safe - d);
    }
    mode.score -= lambda * penalty;
  }
  return out;
}

Trajectory select_plan(const std::array<TrajectorySet, kNumCommands>& modes,
                       DrivingCommand command) {
  const TrajectorySet& set = modes[static_cast<size_t>(command)];
  if (set.modes.empty()) throw std::invalid_argument("select_plan: empty mode set");
  size_t best = 0;
  for (size_t i = 1; i < set.modes.size(); ++i) {
    if (set.modes[i].score > set.modes[best].score) best = i;
  }
  return set.modes[best];
}

PipelineOutput run_frame(const Frame& frame, PlannerState& state, const PlannerModel& model,
                         bool radar_enabled) {
  const FusionConfig& cfg = model.cfg;
  MatX anchors = model.agent_anchor_init;
  CarriedFeatures carried;

  if (state.use_memory && !state.memory.empty()) {
    const Pose2D cur_inv = inverse_pose(frame.ego_pose);
    std::vector<AgentInstance> pool;
    for (const auto& entry : state.memory) {
      const Pose2D rel = compose_pose(cur_inv, entry.ego_pose);
      for (AgentInstance inst : entry.instances) {
        inst.anchor = transform_anchor(rel, inst.anchor);
        pool.push_back(std::move(inst));
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const AgentInstance& a, const AgentInstance& b) {
      return a.class_scores.maxCoeff() > b.class_scores.maxCoeff();
    });
    const int carry = std::min<int>(memory_carry_count(cfg), static_cast<int>(pool.size()));
    carried.features.resize(carry, cfg.embed_dim);
    for (int i = 0; i < carry; ++i) {
      const int row = cfg.num_agent_anchors - carry + i;
      anchors.row(row) = pool[static_cast<size_t>(i)].anchor.transpose();
      carried.rows.push_back(row);
      carried.features.row(i) = pool[static_cast<size_t>(i)].feature.transpose();
    }
  }

  Tape tape(false);
  ParamBinding params(tape, model.params);
  const FrameRunT run = run_frame_t(tape, params, frame, anchors, model.map_anchor_init, cfg,
                                    radar_enabled, carried.rows.empty() ? nullptr : &carried);

  PipelineOutput out;
  const LayerOutputT& last = run.layers.back();
  MatX final_anchors = last.agent_anchors.value();
  normalize_yaw(final_anchors);
  const MatX scores =
      (1.0 / (1.0 + (-last.agent_logits.value().array()).exp())).matrix();
  const MatX& feats = last.agent_features.value();
  const MatX& disp = run.agent_traj_disp.value();
  const MatX& tlogits = run.agent_traj_logits.value();

  for (Eigen::Index i = 0; i < final_anchors.rows(); ++i) {
    AgentInstance inst;
    inst.anchor = final_anchors.row(i).transpose();
    inst.feature = feats.row(i).transpose();
    inst.class_scores = scores.row(i).transpose();
    inst.instance_id = i;
    out.detections.push_back(std::move(inst));
    out.agent_futures.push_back(displacements_to_trajectories(
        disp.row(i).transpose(), tlogits.row(i).transpose(),
        final_anchors.row(i).segment<2>(anchor::kX).transpose(), cfg.motion_steps, cfg.num_modes));
  }

  const MatX& mwps = last.map_waypoints.value();
  const MatX mscores = (1.0 / (1.0 + (-last.map_logits.value().array()).exp())).matrix();
  const MatX& mfeats = last.map_features.value();
  for (Eigen::Index m = 0; m < mwps.rows(); ++m) {
    MapPolyline poly;
    poly.waypoints.resize(cfg.map_waypoints, 2);
    for (int w = 0; w < cfg.map_waypoints; ++w) {
      poly.waypoints(w, 0) = mwps(m, 2 * w);
      poly.waypoints(w, 1) = mwps(m, 2 * w + 1);
    }
    poly.feature = mfeats.row(m).transpose();
    poly.class_scores = mscores.row(m).transpose();
    out.map.push_back(std::move(poly));
  }

  std::vector<TrajectorySet> confident;
  for (size_t i = 0; i < out.detections.size(); ++i) {
    if (out.detections[i].class_scores.maxCoeff() >= kRescoreScoreThreshold) {
      confident.push_back(out.agent_futures[i]);
    }
  }
  for (int cmd = 0; cmd < kNumCommands; ++cmd) {
    const TrajectorySet raw = displacements_to_trajectories(
        run.plan_disp[static_cast<size_t>(cmd)].value().row(0).transpose(),
        run.plan_logits[static_cast<size_t>(cmd)].value().row(0).transpose(), Vec2::Zero(),
        cfg.plan_steps, cfg.num_modes);
    out.ego_modes[static_cast<size_t>(cmd)] = rescore_trajectories(raw, confident);
  }
  out.ego_plan = select_plan(out.ego_modes, frame.command);

  // Memory update: keep this frame's most confident detections.
  PlannerState::MemoryEntry entry;
  entry.ego_pose = frame.ego_pose;
  std::vector<size_t> order(out.detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return out.detections[a].class_scores.maxCoeff() > out.detections[b].class_scores.maxCoeff();
  });
  const size_t keep = std::min<size_t>(order.size(), static_cast<size_t>(memory_carry_count(cfg)));
  for (size_t i = 0; i < keep; ++i) entry.instances.push_back(out.detections[order[i]]);
  state.memory.push_back(std::move(entry));
  while (state.memory.size() > kMemoryFrames) state.memory.erase(state.memory.begin());
  state.prev_plan = out.ego_plan.points;
  state.prev_pose = frame.ego_pose;
  state.has_prev_plan = true;
  return out;
}

}  // namespace rcf
