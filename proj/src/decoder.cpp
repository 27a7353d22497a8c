#include "rcf/decoder.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "rcf/attention.hpp"
#include "rcf/fusion.hpp"

namespace rcf {

MatX box_keypoints_base() {
  MatX kp(kBoxKeypoints, 3);
  kp.setZero();
  kp(1, 0) = 0.5;   // +length face (scaled by box dims on use)
  kp(2, 0) = -0.5;
  kp(3, 1) = 0.5;   // +width face
  kp(4, 1) = -0.5;
  kp(5, 2) = 0.5;   // top
  kp(6, 2) = -0.5;
  return kp;
}

void normalize_yaw(MatX& anchors) {
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
    const Scalar n = std::hypot(anchors(i, anchor::kSinYaw), anchors(i, anchor::kCosYaw));
    if (n > 1e-12) {
      anchors(i, anchor::kSinYaw) /= n;
      anchors(i, anchor::kCosYaw) /= n;
    } else {
      anchors(i, anchor::kSinYaw) = 0.0;
      anchors(i, anchor::kCosYaw) = 1.0;
    }
  }
}

namespace {

Mat3 yaw_rotation(Scalar yaw) {
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Appends the sample for one ego-frame keypoint if it projects into the
// camera; derivative chain is w.r.t. the learnable offset row.
void try_add_sample(int instance, int kp, int cam_idx, const Vec3& p_ego, const Mat3& dp_doff,
                    const CameraModel& cam, const FeatureGrid& grid,
                    std::vector<DeformSample>& out) {
  const Vec3 p_cam = cam.to_camera(p_ego);
  const auto px = project_camera_frame(p_cam, cam);
  if (!px) return;
  const Scalar su = static_cast<Scalar>(grid.width) / cam.image_width;
  const Scalar sv = static_cast<Scalar>(grid.height) / cam.image_height;
  DeformSample s;
  s.instance = instance;
  s.kp = kp;
  s.cam = cam_idx;
  s.stencil = bilinear_stencil(grid.height, grid.width, px->u * su - 0.5, px->v * sv - 0.5);
  const Scalar z = p_cam.z();
  const Eigen::Matrix<Scalar, 1, 3> du_dpcam(cam.fx / z, 0.0, -cam.fx * p_cam.x() / (z * z));
  const Eigen::Matrix<Scalar, 1, 3> dv_dpcam(0.0, cam.fy / z, -cam.fy * p_cam.y() / (z * z));
  s.dgu_doffset = (su * du_dpcam * cam.rot_ego_to_cam * dp_doff).transpose();
  s.dgv_doffset = (sv * dv_dpcam * cam.rot_ego_to_cam * dp_doff).transpose();
  out.push_back(s);
}

}  // namespace

std::vector<DeformSample> build_deform_samples(const MatX& anchors, const MatX& keypoints_base,
                                               const MatX& offsets,
                                               const std::vector<CameraModel>& cams,
                                               const std::vector<FeatureGrid>& grid_shapes) {
  std::vector<DeformSample> out;
  const int num_kp = static_cast<int>(keypoints_base.rows());
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
    const Vec3 center = anchors.row(i).segment<3>(anchor::kX).transpose();
    const Vec3 dims(anchors(i, anchor::kL), anchors(i, anchor::kW), anchors(i, anchor::kH));
    const Scalar yaw = std::atan2(anchors(i, anchor::kSinYaw), anchors(i, anchor::kCosYaw));
    const Mat3 rot = yaw_rotation(yaw);
    for (int k = 0; k < num_kp; ++k) {
      const Vec3 base = keypoints_base.row(k).transpose().cwiseProduct(dims);
      const Vec3 p_ego = center + rot * (base + offsets.row(k).transpose());
      for (size_t c = 0; c < cams.size(); ++c) {
        try_add_sample(static_cast<int>(i), k, static_cast<int>(c), p_ego, rot, cams[c],
                       grid_shapes[c], out);
      }
    }
  }
  return out;
}

std::vector<DeformSample> build_map_deform_samples(const MatX& waypoints_flat, int kp_count,
                                                   const MatX& offsets,
                                                   const std::vector<CameraModel>& cams,
                                                   const std::vector<FeatureGrid>& grid_shapes) {
  std::vector<DeformSample> out;
  const int num_wp = static_cast<int>(waypoints_flat.cols()) / 2;
  for (Eigen::Index i = 0; i < waypoints_flat.rows(); ++i) {
    for (int k = 0; k < kp_count; ++k) {
      const int wp = kp_count > 1 ? k * (num_wp - 1) / (kp_count - 1) : 0;
      const Vec3 base(waypoints_flat(i, 2 * wp), waypoints_flat(i, 2 * wp + 1), 0.0);
      const Vec3 p_ego = base + offsets.row(k).transpose();
      for (size_t c = 0; c < cams.size(); ++c) {
        try_add_sample(static_cast<int>(i), k, static_cast<int>(c), p_ego, Mat3::Identity(),
                       cams[c], grid_shapes[c], out);
      }
    }
  }
  return out;
}

Var deformable_aggregate(const std::vector<Var>& grids, Var weight_logits, Var offsets,
                         const std::vector<DeformSample>& samples, int num_instances,
                         int num_cams) {
  if (grids.empty()) throw std::invalid_argument("deformable_aggregate: no grids");
  Tape& tape = *weight_logits.tape;
  const int num_kp = static_cast<int>(offsets.value().rows());
  const int slots = num_cams * num_kp;
  if (weight_logits.value().cols() != slots || weight_logits.value().rows() != num_instances) {
    throw std::invalid_argument("deformable_aggregate: logits must be N x (cams*keypoints)");
  }
  const Eigen::Index channels = grids[0].value().cols();
  const MatX logits = weight_logits.value();

  MatX sampled(static_cast<Eigen::Index>(samples.size()), channels);
  for (size_t s = 0; s < samples.size(); ++s) {
    const DeformSample& ds = samples[s];
    sampled.row(static_cast<Eigen::Index>(s)).setZero();
    for (int n = 0; n < 4; ++n) {
      sampled.row(static_cast<Eigen::Index>(s)) +=
          ds.stencil.weight[n] * grids[static_cast<size_t>(ds.cam)].value().row(ds.stencil.cell[n]);
    }
  }

  std::vector<std::vector<int>> by_instance(static_cast<size_t>(num_instances));
  for (size_t s = 0; s < samples.size(); ++s) {
    by_instance[static_cast<size_t>(samples[s].instance)].push_back(static_cast<int>(s));
  }
  MatX soft = MatX::Zero(num_instances, slots);
  for (int i = 0; i < num_instances; ++i) {
    const auto& rows = by_instance[static_cast<size_t>(i)];
    if (rows.empty()) continue;
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (int s : rows) {
      const DeformSample& ds = samples[static_cast<size_t>(s)];
      m = std::max(m, logits(i, ds.cam * num_kp + ds.kp));
    }
    Scalar z = 0.0;
    for (int s : rows) {
      const DeformSample& ds = samples[static_cast<size_t>(s)];
      const int slot = ds.cam * num_kp + ds.kp;
      soft(i, slot) = std::exp(logits(i, slot) - m);
      z += soft(i, slot);
    }
    for (int s : rows) {
      const DeformSample& ds = samples[static_cast<size_t>(s)];
      soft(i, ds.cam * num_kp + ds.kp) /= z;
    }
  }

  MatX out = MatX::Zero(num_instances, channels);
  for (size_t s = 0; s < samples.size(); ++s) {
    const DeformSample& ds = samples[s];
    out.row(ds.instance) +=
        soft(ds.instance, ds.cam * num_kp + ds.kp) * sampled.row(static_cast<Eigen::Index>(s));
  }

  std::vector<int> grid_ids;
  std::vector<bool> grid_req;
  bool rg = false;
  for (const Var& g : grids) {
    grid_ids.push_back(g.id);
    grid_req.push_back(tape.node_requires_grad(g.id));
    rg = rg || grid_req.back();
  }
  const bool logit_req = tape.node_requires_grad(weight_logits.id);
  const bool off_req = tape.node_requires_grad(offsets.id);
  rg = rg || logit_req || off_req;
  const int logits_id = weight_logits.id;
  const int offsets_id = offsets.id;
  auto samples_copy = std::make_shared<std::vector<DeformSample>>(samples);
  auto by_inst = std::make_shared<std::vector<std::vector<int>>>(std::move(by_instance));
  auto grid_vals = std::make_shared<std::vector<MatX>>();
  for (const Var& g : grids) grid_vals->push_back(g.value());

  return tape.make_node(std::move(out), rg, [=](Tape& t, const MatX& g) {
    const auto& smp = *samples_copy;
    // dOut/dw and dOut/dsample per entry.
    MatX dsampled = MatX::Zero(static_cast<Eigen::Index>(smp.size()), channels);
    MatX dsoft = MatX::Zero(num_instances, slots);
    for (size_t s = 0; s < smp.size(); ++s) {
      const DeformSample& ds = smp[s];
      const int slot = ds.cam * num_kp + ds.kp;
      dsoft(ds.instance, slot) += g.row(ds.instance).dot(sampled.row(static_cast<Eigen::Index>(s)));
      dsampled.row(static_cast<Eigen::Index>(s)) = soft(ds.instance, slot) * g.row(ds.instance);
    }
    if (logit_req) {
      MatX dlogits = MatX::Zero(num_instances, slots);
      for (int i = 0; i < num_instances; ++i) {
        const auto& rows = (*by_inst)[static_cast<size_t>(i)];
        if (rows.empty()) continue;
        Scalar dot = 0.0;
        for (int s : rows) {
          const DeformSample& ds = smp[static_cast<size_t>(s)];
          const int slot = ds.cam * num_kp + ds.kp;
          dot += dsoft(i, slot) * soft(i, slot);
        }
        for (int s : rows) {
          const DeformSample& ds = smp[static_cast<size_t>(s)];
          const int slot = ds.cam * num_kp + ds.kp;
          dlogits(i, slot) = soft(i, slot) * (dsoft(i, slot) - dot);
        }
      }
      t.accumulate_grad(logits_id, dlogits);
    }
    bool any_grid = false;
    for (bool r : grid_req) any_grid = any_grid || r;
    if (any_grid) {
      std::vector<MatX> dgrids;
      for (const MatX& gv : *grid_vals) dgrids.push_back(MatX::Zero(gv.rows(), gv.cols()));
      for (size_t s = 0; s < smp.size(); ++s) {
        const DeformSample& ds = smp[s];
        if (!grid_req[static_cast<size_t>(ds.cam)]) continue;
        for (int n = 0; n < 4; ++n) {
          dgrids[static_cast<size_t>(ds.cam)].row(ds.stencil.cell[n]) +=
              ds.stencil.weight[n] * dsampled.row(static_cast<Eigen::Index>(s));
        }
      }
      for (size_t c = 0; c < grid_ids.size(); ++c) {
        if (grid_req[c]) t.accumulate_grad(grid_ids[c], dgrids[c]);
      }
    }
    if (off_req) {
      MatX doff = MatX::Zero(num_kp, 3);
      for (size_t s = 0; s < smp.size(); ++s) {
        const DeformSample& ds = smp[s];
        const auto& gv = (*grid_vals)[static_cast<size_t>(ds.cam)];
        Scalar dl_dgu = 0.0, dl_dgv = 0.0;
        for (int n = 0; n < 4; ++n) {
          const Scalar dot = dsampled.row(static_cast<Eigen::Index>(s)).dot(gv.row(ds.stencil.cell[n]));
          dl_dgu += ds.stencil.dwdu[n] * dot;
          dl_dgv += ds.stencil.dwdv[n] * dot;
        }
        doff.row(ds.kp) +=
            (dl_dgu * ds.dgu_doffset + dl_dgv * ds.dgv_doffset).transpose();
      }
      t.accumulate_grad(offsets_id, doff);
    }
  });
}

// --- Decoder layer ---

namespace {

std::string pfx(int layer) { return "dec" + std::to_string(layer) + "."; }

// Per-query radar cross-attention with learned projections; identity when a
// query has no radar in range.
Var radar_cross_attention(Tape& tape, ParamBinding& params, const std::string& base,
                          Var features, const MatX& dists, Var radar_features,
                          const FusionConfig& cfg) {
  const Eigen::Index n = features.value().rows();
  Var wq = params(base + "wq"), wk = params(base + "wk"), wv = params(base + "wv"),
      wo = params(base + "wo");
  Var q_all = matmul(features, wq);
  Var k_all = matmul(radar_features, wk);
  Var v_all = matmul(radar_features, wv);
  Var alpha = tape.constant(cfg.alpha);
  std::vector<Var> updates;
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::vector<int> idx =
        topk_in_range(dists.row(i).transpose(), cfg.topk_radar, cfg.r_max);
    if (idx.empty()) continue;
    MatX d(1, static_cast<Eigen::Index>(idx.size()));
    for (size_t j = 0; j < idx.size(); ++j) d(0, static_cast<Eigen::Index>(j)) = dists(i, idx[j]);
    Var q = gather_rows(q_all, {static_cast<int>(i)});
    Var k = gather_rows(k_all, idx);
    Var v = gather_rows(v_all, idx);
    updates.push_back(range_attention(q, k, v, alpha, d, cfg.r_max, cfg.num_heads));
    rows.push_back(static_cast<int>(i));
  }
  if (updates.empty()) return features;
  return scatter_rows_add(features, matmul(vcat(updates), wo), rows);
}

MatX agent_distances(const MatX& anchors, const MatX& radar_pos) {
  MatX centers(anchors.rows(), 3);
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) {
    centers.row(i) = anchors.row(i).segment<3>(anchor::kX);
  }
  return pairwise_distances(centers, radar_pos);
}

MatX map_distances(const MatX& waypoints_flat, const MatX& radar_pos) {
  const int num_wp = static_cast<int>(waypoints_flat.cols()) / 2;
  MatX d(waypoints_flat.rows(), radar_pos.rows());
  for (Eigen::Index i = 0; i < waypoints_flat.rows(); ++i) {
    PointsXY poly(num_wp, 2);
    for (int w = 0; w < num_wp; ++w) {
      poly(w, 0) = waypoints_flat(i, 2 * w);
      poly(w, 1) = waypoints_flat(i, 2 * w + 1);
    }
    for (Eigen::Index r = 0; r < radar_pos.rows(); ++r) {
      d(i, r) = point_polyline_distance(radar_pos.row(r).head<2>().transpose(), poly).distance;
    }
  }
  return d;
}

// Query positions for the joint self-attention (agents: center; maps: mean).
MatX joint_positions(const MatX& agent_anchors, const MatX& map_waypoints_flat) {
  const Eigen::Index na = agent_anchors.rows(), nm = map_waypoints_flat.rows();
  const int num_wp = static_cast<int>(map_waypoints_flat.cols()) / 2;
  MatX pos(na + nm, 3);
  for (Eigen::Index i = 0; i < na; ++i) pos.row(i) = agent_anchors.row(i).segment<3>(anchor::kX);
  for (Eigen::Index m = 0; m < nm; ++m) {
    Scalar sx = 0.0, sy = 0.0;
    for (int w = 0; w < num_wp; ++w) {
      sx += map_waypoints_flat(m, 2 * w);
      sy += map_waypoints_flat(m, 2 * w + 1);
    }
    pos.row(na + m) << sx / num_wp, sy / num_wp, 0.0;
  }
  return pos;
}

}  // namespace

void init_decoder_params(ParamStore& store, const FusionConfig& cfg, Rng& rng) {
  const int c = cfg.embed_dim;
  const Scalar s = 1.0 / std::sqrt(static_cast<Scalar>(c));
  for (int l = 0; l < cfg.num_decoder_layers; ++l) {
    const std::string p = pfx(l);
    for (const char* blk : {"ra.", "rm.", "sa."}) {
      store.init_normal(p + blk + std::string("wq"), c, c, rng, s);
      store.init_normal(p + blk + std::string("wk"), c, c, rng, s);
      store.init_normal(p + blk + std::string("wv"), c, c, rng, s);
      store.init_normal(p + blk + std::string("wo"), c, c, rng, s * 0.5);
    }
    store.init_normal(p + "sa.wpos", 3, c, rng, 0.1);
    store.create(p + "sa.bpos", 1, c);
    store.init_normal(p + "df.offsets", kBoxKeypoints, 3, rng, 0.05);
    store.init_normal(p + "df.wlogit", c, cfg.num_cameras * kBoxKeypoints, rng, s);
    store.create(p + "df.blogit", 1, cfg.num_cameras * kBoxKeypoints);
    store.init_normal(p + "df.wo", c, c, rng, s * 0.5);
    store.init_normal(p + "dm.offsets", kMapKeypoints, 3, rng, 0.05);
    store.init_normal(p + "dm.wlogit", c, cfg.num_cameras * kMapKeypoints, rng, s);
    store.create(p + "dm.blogit", 1, cfg.num_cameras * kMapKeypoints);
    store.init_normal(p + "dm.wo", c, c, rng, s * 0.5);
    store.init_normal(p + "ff.w1", c, 2 * c, rng, s);
    store.create(p + "ff.b1", 1, 2 * c);
    store.init_normal(p + "ff.w2", 2 * c, c, rng, 1.0 / std::sqrt(2.0 * c));
    store.create(p + "ff.b2", 1, c);
    store.init_normal(p + "hd.w", c, anchor::kDim, rng, 0.01);
    store.create(p + "hd.b", 1, anchor::kDim);
    store.init_normal(p + "hc.w", c, cfg.num_agent_classes, rng, 0.1);
    store.create(p + "hc.b", 1, cfg.num_agent_classes);
    store.init_normal(p + "hm.w", c, 2 * cfg.map_waypoints, rng, 0.01);
    store.create(p + "hm.b", 1, 2 * cfg.map_waypoints);
    store.init_normal(p + "hmc.w", c, cfg.num_map_classes, rng, 0.1);
    store.create(p + "hmc.b", 1, cfg.num_map_classes);
  }
}

LayerOutputT decoder_layer_t(Tape& tape, ParamBinding& params, int layer, Var agent_features,
                             const MatX& agent_anchors, Var map_features,
                             const MatX& map_waypoints_flat, const Var* radar_features,
                             const MatX& radar_pos, const std::vector<Var>& grids,
                             const std::vector<FeatureGrid>& grid_shapes,
                             const std::vector<CameraModel>& cams, const FusionConfig& cfg) {
  const std::string p = pfx(layer);
  const Eigen::Index na = agent_features.value().rows();
  const Eigen::Index nm = map_features.value().rows();

  Var fa = agent_features;
  Var fm = map_features;

  // 1. Radar aggregation for both query kinds.
  if (radar_features != nullptr && radar_pos.rows() > 0) {
    fa = radar_cross_attention(tape, params, p + "ra.", fa, agent_distances(agent_anchors, radar_pos),
                               *radar_features, cfg);
    if (nm > 0) {
      fm = radar_cross_attention(tape, params, p + "rm.", fm,
                                 map_distances(map_waypoints_flat, radar_pos), *radar_features,
                                 cfg);
    }
  }

  // 2. Deformable perspective aggregation.
  if (!grids.empty()) {
    Var off_a = params(p + "df.offsets");
    const auto samples_a = build_deform_samples(agent_anchors, box_keypoints_base(),
                                                off_a.value(), cams, grid_shapes);
    if (!samples_a.empty()) {
      Var logits = linear(fa, params(p + "df.wlogit"), params(p + "df.blogit"));
      Var agg = deformable_aggregate(grids, logits, off_a, samples_a, static_cast<int>(na),
                                     static_cast<int>(cams.size()));
      fa = add(fa, matmul(agg, params(p + "df.wo")));
    }
    if (nm > 0) {
      Var off_m = params(p + "dm.offsets");
      const auto samples_m = build_map_deform_samples(map_waypoints_flat, kMapKeypoints,
                                                      off_m.value(), cams, grid_shapes);
      if (!samples_m.empty()) {
        Var logits_m = linear(fm, params(p + "dm.wlogit"), params(p + "dm.blogit"));
        Var agg_m = deformable_aggregate(grids, logits_m, off_m, samples_m, static_cast<int>(nm),
                                         static_cast<int>(cams.size()));
        fm = add(fm, matmul(agg_m, params(p + "dm.wo")));
      }
    }
  }

  // 3. Joint self-attention with position embeddings.
  Var x = nm > 0 ? vcat({fa, fm}) : fa;
  {
    const MatX pos = joint_positions(agent_anchors, map_waypoints_flat)
                         .topRows(x.value().rows());
    Var posemb = linear(tape.constant(pos), params(p + "sa.wpos"), params(p + "sa.bpos"));
    Var xq = add(x, posemb);
    Var q = matmul(xq, params(p + "sa.wq"));
    Var k = matmul(xq, params(p + "sa.wk"));
    Var v = matmul(x, params(p + "sa.wv"));
    const MatX zero_dist = MatX::Zero(x.value().rows(), x.value().rows());
    Var attended = range_attention(q, k, v, tape.constant(0.0), zero_dist, cfg.r_max,
                                   cfg.num_heads);
    x = layernorm_rows(add(x, matmul(attended, params(p + "sa.wo"))));
  }

  // 4. Feed-forward.
  {
    Var h = relu(linear(x, params(p + "ff.w1"), params(p + "ff.b1")));
    x = layernorm_rows(add(x, linear(h, params(p + "ff.w2"), params(p + "ff.b2"))));
  }

  LayerOutputT out;
  std::vector<int> agent_idx(static_cast<size_t>(na));
  for (Eigen::Index i = 0; i < na; ++i) agent_idx[static_cast<size_t>(i)] = static_cast<int>(i);
  out.agent_features = gather_rows(x, agent_idx);
  if (nm > 0) {
    std::vector<int> map_idx(static_cast<size_t>(nm));
    for (Eigen::Index m = 0; m < nm; ++m) map_idx[static_cast<size_t>(m)] = static_cast<int>(na + m);
    out.map_features = gather_rows(x, map_idx);
  } else {
    out.map_features = fm;
  }

  // 5. Refinement and classification heads (additive deltas).
  Var delta_a = linear(out.agent_features, params(p + "hd.w"), params(p + "hd.b"));
  out.agent_anchors = add(tape.constant(agent_anchors), delta_a);
  out.agent_logits = linear(out.agent_features, params(p + "hc.w"), params(p + "hc.b"));
  if (nm > 0) {
    Var delta_m = linear(out.map_features, params(p + "hm.w"), params(p + "hm.b"));
    out.map_waypoints = add(tape.constant(map_waypoints_flat), delta_m);
    out.map_logits = linear(out.map_features, params(p + "hmc.w"), params(p + "hmc.b"));
  } else {
    out.map_waypoints = tape.constant(map_waypoints_flat);
    out.map_logits = tape.constant(MatX::Zero(0, cfg.num_map_classes));
  }
  return out;
}

std::pair<std::vector<AgentInstance>, std::vector<MapPolyline>> decoder_layer(
    const std::vector<AgentInstance>& agents, const std::vector<MapPolyline>& maps,
    const std::vector<RadarFeature>& radar, const std::vector<FeatureGrid>& grids,
    const std::vector<CameraModel>& cams, const ParamStore& store, int layer,
    const FusionConfig& cfg) {
  Tape tape(false);
  ParamBinding params(tape, store);

  MatX fa(static_cast<Eigen::Index>(agents.size()), cfg.embed_dim);
  MatX anchors(static_cast<Eigen::Index>(agents.size()), anchor::kDim);
  for (size_t i = 0; i < agents.size(); ++i) {
    fa.row(static_cast<Eigen::Index>(i)) = agents[i].feature.transpose();
    anchors.row(static_cast<Eigen::Index>(i)) = agents[i].anchor.transpose();
  }
  MatX fm(static_cast<Eigen::Index>(maps.size()), cfg.embed_dim);
  MatX wps(static_cast<Eigen::Index>(maps.size()), 2 * cfg.map_waypoints);
  for (size_t m = 0; m < maps.size(); ++m) {
    fm.row(static_cast<Eigen::Index>(m)) = maps[m].feature.transpose();
    const PointsXY rs = maps[m].waypoints.rows() == cfg.map_waypoints
                            ? PointsXY(maps[m].waypoints)
                            : resample_polyline(maps[m].waypoints, cfg.map_waypoints);
    for (int w = 0; w < cfg.map_waypoints; ++w) {
      wps(static_cast<Eigen::Index>(m), 2 * w) = rs(w, 0);
      wps(static_cast<Eigen::Index>(m), 2 * w + 1) = rs(w, 1);
    }
  }

  std::vector<Var> grid_vars;
  for (const FeatureGrid& g : grids) grid_vars.push_back(tape.constant(g.values));

  Var radar_var{};
  MatX radar_pos(0, 3);
  const Var* radar_ptr = nullptr;
  if (!radar.empty()) {
    MatX feats(static_cast<Eigen::Index>(radar.size()), cfg.embed_dim);
    radar_pos.resize(static_cast<Eigen::Index>(radar.size()), 3);
    for (size_t i = 0; i < radar.size(); ++i) {
      feats.row(static_cast<Eigen::Index>(i)) = radar[i].feature.transpose();
      radar_pos.row(static_cast<Eigen::Index>(i)) = radar[i].position.transpose();
    }
    radar_var = tape.constant(feats);
    radar_ptr = &radar_var;
  }

  const LayerOutputT out =
      decoder_layer_t(tape, params, layer, tape.constant(fa), anchors, tape.constant(fm), wps,
                      radar_ptr, radar_pos, grid_vars, grids, cams, cfg);

  std::vector<AgentInstance> out_agents = agents;
  MatX refined = out.agent_anchors.value();
  normalize_yaw(refined);
  const MatX scores = (1.0 / (1.0 + (-out.agent_logits.value().array()).exp())).matrix();
  for (size_t i = 0; i < out_agents.size(); ++i) {
    out_agents[i].feature = out.agent_features.value().row(static_cast<Eigen::Index>(i)).transpose();
    out_agents[i].anchor = refined.row(static_cast<Eigen::Index>(i)).transpose();
    out_agents[i].class_scores = scores.row(static_cast<Eigen::Index>(i)).transpose();
  }
  std::vector<MapPolyline> out_maps = maps;
  if (!maps.empty()) {
    const MatX mscores = (1.0 / (1.0 + (-out.map_logits.value().array()).exp())).matrix();
    for (size_t m = 0; m < out_maps.size(); ++m) {
      out_maps[m].feature = out.map_features.value().row(static_cast<Eigen::Index>(m)).transpose();
      const Eigen::Index count = out_maps[m].waypoints.rows();
      PointsXY full(cfg.map_waypoints, 2);
      for (int w = 0; w < cfg.map_waypoints; ++w) {
        full(w, 0) = out.map_waypoints.value()(static_cast<Eigen::Index>(m), 2 * w);
        full(w, 1) = out.map_waypoints.value()(static_cast<Eigen::Index>(m), 2 * w + 1);
      }
      out_maps[m].waypoints = count == cfg.map_waypoints ? full : resample_polyline(full, static_cast<int>(count));
      out_maps[m].class_scores = mscores.row(static_cast<Eigen::Index>(m)).transpose();
    }
  }
  return {out_agents, out_maps};
}

}  // namespace rcf
