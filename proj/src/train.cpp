#include "rcf/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcf/parallel.hpp"

#include "rcf/geometry.hpp"

namespace rcf {

namespace {

// Sigmoid focal term over a logits matrix with a {0,1} positive mask,
// normalized by `norm`. Entries are guarded against saturated sigmoids.
Var sigmoid_focal_t(Tape& tape, Var logits, const MatX& pos_mask, Scalar gamma, Scalar weight,
                    Scalar norm) {
  Var p = sigmoid(logits);
  Var one_minus = add_scalar(scale(p, -1.0), 1.0);
  Var pos = mul(tape.constant(pos_mask),
                mul(pow_scalar(one_minus, gamma), log_op(add_scalar(p, 1e-12))));
  const MatX neg_mask = MatX::Ones(pos_mask.rows(), pos_mask.cols()) - pos_mask;
  Var neg = mul(tape.constant(neg_mask),
                mul(pow_scalar(p, gamma), log_op(add_scalar(one_minus, 1e-12))));
  Var loss = add(scale(sum(pos), -weight), scale(sum(neg), -(1.0 - weight)));
  return scale(loss, 1.0 / norm);
}

// Focal cross-entropy over one softmax row with a single positive mode.
Var mode_focal_t(Tape& tape, Var logits_row, int positive, Scalar gamma) {
  Var p = softmax_rows(logits_row);
  MatX pos_mask = MatX::Zero(1, logits_row.value().cols());
  pos_mask(0, positive) = 1.0;
  Var one_minus = add_scalar(scale(p, -1.0), 1.0 + 1e-9);
  Var pos = mul(tape.constant(pos_mask),
                mul(pow_scalar(one_minus, gamma), log_op(add_scalar(p, 1e-12))));
  const MatX neg_mask = MatX::Ones(1, pos_mask.cols()) - pos_mask;
  Var neg = mul(tape.constant(neg_mask), mul(pow_scalar(p, gamma), log_op(one_minus)));
  return scale(add(sum(pos), sum(neg)), -1.0);
}

// One mode's displacement slice as cumulative positions (H x 2) on the tape.
Var mode_cumsum_t(Tape& tape, Var disp_matrix, int row, int mode, int horizon, int num_modes) {
  Var r = gather_rows(disp_matrix, {row});
  Var per_mode = reshape(r, num_modes, 2 * horizon);
  Var steps = reshape(gather_rows(per_mode, {mode}), horizon, 2);
  MatX lower = MatX::Zero(horizon, horizon);
  for (int i = 0; i < horizon; ++i) lower.row(i).head(i + 1).setOnes();
  return matmul(tape.constant(lower), steps);
}

// Winner mode by average displacement error of the materialized cumsums.
int best_mode(const VecX& disp_row, const Vec2& origin, const MatX& target_xy, int horizon,
              int num_modes) {
  int best = 0;
  Scalar best_err = std::numeric_limits<Scalar>::infinity();
  const int steps = std::min<int>(horizon, static_cast<int>(target_xy.rows()));
  for (int m = 0; m < num_modes; ++m) {
    Vec2 p = origin;
    Scalar err = 0.0;
    for (int k = 0; k < steps; ++k) {
      p.x() += disp_row(m * 2 * horizon + 2 * k);
      p.y() += disp_row(m * 2 * horizon + 2 * k + 1);
      err += (p - target_xy.row(k).transpose()).norm();
    }
    if (err < best_err) {
      best_err = err;
      best = m;
    }
  }
  return best;
}

struct FrameLoss {
  Var total;
  Scalar detection = 0.0;
  Scalar map = 0.0;
  Scalar motion = 0.0;
  Scalar plan = 0.0;
};

FrameLoss frame_loss_t(Tape& tape, const Frame& frame, const FrameRunT& run,
                       const FusionConfig& cfg, const TrainConfig& tc) {
  const DetectionLossWeights& lw = tc.match;
  Var det_loss = tape.constant(0.0);
  Var map_loss = tape.constant(0.0);

  const int ng = static_cast<int>(frame.gt_agents.size());
  const int nm = static_cast<int>(frame.gt_map.size());
  MatX gt_map_flat(nm, 2 * cfg.map_waypoints);
  std::vector<PointsXY> gt_map_rs(static_cast<size_t>(nm));
  for (int j = 0; j < nm; ++j) {
    gt_map_rs[static_cast<size_t>(j)] =
        resample_polyline(frame.gt_map[static_cast<size_t>(j)].waypoints, cfg.map_waypoints);
    for (int w = 0; w < cfg.map_waypoints; ++w) {
      gt_map_flat(j, 2 * w) = gt_map_rs[static_cast<size_t>(j)](w, 0);
      gt_map_flat(j, 2 * w + 1) = gt_map_rs[static_cast<size_t>(j)](w, 1);
    }
  }

  std::vector<std::pair<int, int>> final_agent_pairs;
  for (size_t l = 0; l < run.layers.size(); ++l) {
    const LayerOutputT& lo = run.layers[l];
    const MatX anchors = lo.agent_anchors.value();
    const MatX probs = (1.0 / (1.0 + (-lo.agent_logits.value().array()).exp())).matrix();
    const int np = static_cast<int>(anchors.rows());

    MatX pos_mask = MatX::Zero(np, cfg.num_agent_classes);
    std::vector<std::pair<int, int>> pairs;
    if (ng > 0) {
      MatX cost(np, ng);
      for (int i = 0; i < np; ++i) {
        for (int j = 0; j < ng; ++j) {
          const GtAgent& gt = frame.gt_agents[static_cast<size_t>(j)];
          const Scalar l1 =
              (anchors.row(i).transpose() - gt.anchor).cwiseAbs().mean();
          cost(i, j) = lw.class_cost * (1.0 - probs(i, gt.class_id)) + lw.l1_cost * l1;
        }
      }
      pairs = hungarian_match(cost).pairs;
      for (const auto& [i, j] : pairs) {
        pos_mask(i, frame.gt_agents[static_cast<size_t>(j)].class_id) = 1.0;
      }
    }
    const Scalar norm = std::max<Scalar>(1.0, static_cast<Scalar>(pairs.size()));
    Var cls = sigmoid_focal_t(tape, lo.agent_logits, pos_mask, lw.focal_gamma, lw.focal_weight,
                              norm);
    det_loss = add(det_loss, cls);
    if (!pairs.empty()) {
      std::vector<int> rows;
      MatX targets(static_cast<Eigen::Index>(pairs.size()), anchor::kDim);
      for (size_t k = 0; k < pairs.size(); ++k) {
        rows.push_back(pairs[k].first);
        targets.row(static_cast<Eigen::Index>(k)) =
            frame.gt_agents[static_cast<size_t>(pairs[k].second)].anchor.transpose();
      }
      Var reg = l1_to_constant(gather_rows(lo.agent_anchors, rows), targets);
      det_loss = add(det_loss, scale(reg, lw.regression_weight));
    }
    if (l + 1 == run.layers.size()) final_agent_pairs = pairs;

    const MatX map_wps = lo.map_waypoints.value();
    const int npm = static_cast<int>(map_wps.rows());
    if (npm > 0) {
      const MatX mprobs = (1.0 / (1.0 + (-lo.map_logits.value().array()).exp())).matrix();
      MatX mpos = MatX::Zero(npm, cfg.num_map_classes);
      std::vector<std::pair<int, int>> mpairs;
      if (nm > 0) {
        MatX cost(npm, nm);
        for (int i = 0; i < npm; ++i) {
          for (int j = 0; j < nm; ++j) {
            const Scalar l1 = (map_wps.row(i) - gt_map_flat.row(j)).cwiseAbs().mean();
            cost(i, j) = lw.class_cost * (1.0 - mprobs(i, frame.gt_map[static_cast<size_t>(j)].class_id)) +
                         lw.l1_cost * l1;
          }
        }
        mpairs = hungarian_match(cost).pairs;
        for (const auto& [i, j] : mpairs) {
          mpos(i, frame.gt_map[static_cast<size_t>(j)].class_id) = 1.0;
        }
      }
      const Scalar mnorm = std::max<Scalar>(1.0, static_cast<Scalar>(mpairs.size()));
      map_loss = add(map_loss, sigmoid_focal_t(tape, lo.map_logits, mpos, lw.focal_gamma,
                                               lw.focal_weight, mnorm));
      if (!mpairs.empty()) {
        std::vector<int> rows;
        MatX targets(static_cast<Eigen::Index>(mpairs.size()), 2 * cfg.map_waypoints);
        for (size_t k = 0; k < mpairs.size(); ++k) {
          rows.push_back(mpairs[k].first);
          targets.row(static_cast<Eigen::Index>(k)) = gt_map_flat.row(mpairs[k].second);
        }
        Var reg = l1_to_constant(gather_rows(lo.map_waypoints, rows), targets);
        map_loss = add(map_loss, scale(reg, lw.regression_weight));
      }
    }
  }
  const Scalar inv_layers = 1.0 / static_cast<Scalar>(run.layers.size());
  det_loss = scale(det_loss, inv_layers);
  map_loss = scale(map_loss, inv_layers);

  // Motion supervision on the final layer's matched agents.
  Var motion_loss = tape.constant(0.0);
  int motion_count = 0;
  const MatX final_anchors = run.layers.back().agent_anchors.value();
  const MatX disp = run.agent_traj_disp.value();
  for (const auto& [i, j] : final_agent_pairs) {
    const GtAgent& gt = frame.gt_agents[static_cast<size_t>(j)];
    if (gt.future.rows() == 0) continue;
    const Vec2 origin = final_anchors.row(i).segment<2>(anchor::kX).transpose();
    const MatX target_xy = gt.future.leftCols(2);
    const int m = best_mode(disp.row(i).transpose(), origin, target_xy, cfg.motion_steps,
                            cfg.num_modes);
    Var cum = mode_cumsum_t(tape, run.agent_traj_disp, i, m, cfg.motion_steps, cfg.num_modes);
    MatX rel_target = target_xy;
    rel_target.rowwise() -= origin.transpose();
    motion_loss = add(motion_loss, l1_to_constant(cum, rel_target));
    motion_loss = add(motion_loss,
                      mode_focal_t(tape, gather_rows(run.agent_traj_logits, {i}), m,
                                   lw.focal_gamma));
    ++motion_count;
  }
  if (motion_count > 0) {
    motion_loss = scale(motion_loss, 1.0 / static_cast<Scalar>(motion_count));
  }

  // Plan supervision: only the commanded head sees this frame; its modes
  // compete against each other, never against the other commands' heads.
  const int cmd = static_cast<int>(frame.command);
  const Var& pdisp = run.plan_disp[static_cast<size_t>(cmd)];
  const int pm = best_mode(pdisp.value().row(0).transpose(), Vec2::Zero(), frame.gt_ego_future,
                           cfg.plan_steps, cfg.num_modes);
  Var plan_loss = l1_to_constant(mode_cumsum_t(tape, pdisp, 0, pm, cfg.plan_steps, cfg.num_modes),
                                 frame.gt_ego_future);
  plan_loss = add(plan_loss,
                  mode_focal_t(tape, run.plan_logits[static_cast<size_t>(cmd)], pm,
                               lw.focal_gamma));

  FrameLoss out;
  out.detection = det_loss.value()(0, 0);
  out.map = map_loss.value()(0, 0);
  out.motion = motion_loss.value()(0, 0);
  out.plan = plan_loss.value()(0, 0);
  out.total = add(add(scale(det_loss, tc.weights.detection), scale(map_loss, tc.weights.map)),
                  add(scale(motion_loss, tc.weights.motion), scale(plan_loss, tc.weights.plan)));
  return out;
}

}  // namespace

namespace {

struct ScenePass {
  std::map<std::string, MatX> grads;
  EpochStats stats;
  int frames = 0;
};

void merge_grads(std::map<std::string, MatX>& into, const std::map<std::string, MatX>& from) {
  for (const auto& [name, g] : from) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
    } else {
      it->second += g;
    }
  }
}

}  // namespace

TrainResult train_model(PlannerModel& model, const std::vector<std::vector<Frame>>& scenes,
                        const TrainConfig& tc) {
  TrainResult result;
  SgdOptimizer opt(tc.sgd);
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::vector<ScenePass> passes(scenes.size());
    parallel_for(static_cast<int>(scenes.size()), tc.workers, [&](int si) {
      ScenePass& pass = passes[static_cast<size_t>(si)];
      for (const Frame& frame : scenes[static_cast<size_t>(si)]) {
        Tape tape(true);
        ParamBinding params(tape, model.params);
        const FrameRunT run = run_frame_t(tape, params, frame, model.agent_anchor_init,
                                          model.map_anchor_init, model.cfg, tc.radar_enabled);
        FrameLoss loss = frame_loss_t(tape, frame, run, model.cfg, tc);
        tape.backward(loss.total);
        merge_grads(pass.grads, params.grads());
        pass.stats.total += loss.total.value()(0, 0);
        pass.stats.detection += loss.detection;
        pass.stats.map += loss.map;
        pass.stats.motion += loss.motion;
        pass.stats.plan += loss.plan;
        ++pass.frames;
      }
    });

    std::map<std::string, MatX> grad_accum;
    EpochStats stats;
    int frames = 0;
    for (const ScenePass& pass : passes) {
      merge_grads(grad_accum, pass.grads);
      stats.total += pass.stats.total;
      stats.detection += pass.stats.detection;
      stats.map += pass.stats.map;
      stats.motion += pass.stats.motion;
      stats.plan += pass.stats.plan;
      frames += pass.frames;
    }
    if (frames == 0) throw std::invalid_argument("train_model: no frames");
    const Scalar inv = 1.0 / static_cast<Scalar>(frames);
    for (auto& [name, g] : grad_accum) g *= inv;
    opt.step(model.params, grad_accum);
    stats.total *= inv;
    stats.detection *= inv;
    stats.map *= inv;
    stats.motion *= inv;
    stats.plan *= inv;
    result.epochs.push_back(stats);
  }
  return result;
}

}  // namespace rcf
