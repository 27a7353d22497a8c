#include "rcf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rcf/attention.hpp"
#include "rcf/geometry.hpp"

namespace rcf {

std::vector<int> topk_in_range(const VecX& dists, int k, Scalar r_max) {
  std::vector<int> idx;
  for (int i = 0; i < dists.size(); ++i) {
    if (dists(i) <= r_max) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return dists(a) < dists(b); });
  if (static_cast<int>(idx.size()) > k) idx.resize(static_cast<size_t>(k));
  return idx;
}

MatX map_radar_distances(const std::vector<MapPolyline>& maps,
                         const std::vector<RadarFeature>& radar) {
  MatX d(static_cast<Eigen::Index>(maps.size()), static_cast<Eigen::Index>(radar.size()));
  for (size_t m = 0; m < maps.size(); ++m) {
    for (size_t r = 0; r < radar.size(); ++r) {
      const Vec2 p = radar[r].position.head<2>();
      d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(r)) =
          point_polyline_distance(p, maps[m].waypoints).distance;
    }
  }
  return d;
}

namespace {

MatX stack_features(const std::vector<RadarFeature>& radar, const std::vector<int>& idx) {
  MatX k(static_cast<Eigen::Index>(idx.size()), radar[0].feature.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    k.row(static_cast<Eigen::Index>(i)) = radar[static_cast<size_t>(idx[i])].feature.transpose();
  }
  return k;
}

}  // namespace

std::vector<AgentInstance> aggregate_agent_queries(const std::vector<AgentInstance>& agents,
                                                   const std::vector<RadarFeature>& radar,
                                                   const FusionConfig& cfg) {
  std::vector<AgentInstance> out = agents;
  if (radar.empty()) return out;
  for (AgentInstance& agent : out) {
    VecX dists(static_cast<Eigen::Index>(radar.size()));
    for (size_t r = 0; r < radar.size(); ++r) {
      dists(static_cast<Eigen::Index>(r)) = (radar[r].position - agent.center()).norm();
    }
    const std::vector<int> idx = topk_in_range(dists, cfg.topk_radar, cfg.r_max);
    if (idx.empty()) continue;
    const MatX k = stack_features(radar, idx);
    MatX d(1, static_cast<Eigen::Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) d(0, static_cast<Eigen::Index>(i)) = dists(idx[i]);
    const MatX q = agent.feature.transpose();
    const MatX attended =
        range_adaptive_attention_dist(q, k, k, d, cfg.alpha, cfg.r_max, cfg.num_heads);
    agent.feature += attended.row(0).transpose();
  }
  return out;
}

std::vector<MapPolyline> aggregate_map_queries(const std::vector<MapPolyline>& maps,
                                               const std::vector<RadarFeature>& radar,
                                               const FusionConfig& cfg) {
  std::vector<MapPolyline> out = maps;
  if (radar.empty() || maps.empty()) return out;
  const MatX all_d = map_radar_distances(out, radar);
  for (size_t m = 0; m < out.size(); ++m) {
    const VecX dists = all_d.row(static_cast<Eigen::Index>(m)).transpose();
    const std::vector<int> idx = topk_in_range(dists, cfg.topk_radar, cfg.r_max);
    if (idx.empty()) continue;
    const MatX k = stack_features(radar, idx);
    MatX d(1, static_cast<Eigen::Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) d(0, static_cast<Eigen::Index>(i)) = dists(idx[i]);
    const MatX q = out[m].feature.transpose();
    const MatX attended =
        range_adaptive_attention_dist(q, k, k, d, cfg.alpha, cfg.r_max, cfg.num_heads);
    out[m].feature += attended.row(0).transpose();
  }
  return out;
}

std::vector<FrustumLink> frustum_links(const std::vector<CameraModel>& cams,
                                       const std::vector<FeatureGrid>& grids,
                                       const MatX& radar_pos, Scalar pixel_radius) {
  std::vector<FrustumLink> links;
  for (size_t c = 0; c < cams.size(); ++c) {
    const CameraModel& cam = cams[c];
    const FeatureGrid& grid = grids[c];
    if (grid.cells() == 0) continue;
    std::vector<std::pair<int, PixelPoint>> projected;
    for (Eigen::Index r = 0; r < radar_pos.rows(); ++r) {
      const auto px = project_to_camera(radar_pos.row(r).transpose(), cam);
      if (px) projected.emplace_back(static_cast<int>(r), *px);
    }
    if (projected.empty()) continue;
    const Scalar cell_w = static_cast<Scalar>(cam.image_width) / grid.width;
    const Scalar cell_h = static_cast<Scalar>(cam.image_height) / grid.height;
    for (int row = 0; row < grid.height; ++row) {
      for (int col = 0; col < grid.width; ++col) {
        const Scalar cu = (col + 0.5) * cell_w;
        const Scalar cv = (row + 0.5) * cell_h;
        FrustumLink link;
        link.cam = static_cast<int>(c);
        link.cell = row * grid.width + col;
        for (const auto& [ri, px] : projected) {
          const Scalar du = px.u - cu, dv = px.v - cv;
          if (du * du + dv * dv <= pixel_radius * pixel_radius) link.radar.push_back(ri);
        }
        if (!link.radar.empty()) links.push_back(std::move(link));
      }
    }
  }
  return links;
}

void init_frustum_params(ParamStore& store, int embed_dim, Rng& rng) {
  const Scalar s = 1.0 / std::sqrt(static_cast<Scalar>(embed_dim));
  store.init_normal("fr.wq", embed_dim, embed_dim, rng, s);
  store.init_normal("fr.wk", embed_dim, embed_dim, rng, s);
  store.init_normal("fr.wv", embed_dim, embed_dim, rng, s);
  store.init_normal("fr.wo", embed_dim, embed_dim, rng, s);
}

std::vector<Var> frustum_cross_attention_t(Tape& tape, ParamBinding& params,
                                           const std::vector<Var>& grid_values,
                                           Var radar_features, const MatX& radar_pos,
                                           const std::vector<CameraModel>& cams,
                                           const std::vector<FeatureGrid>& grid_shapes,
                                           const FusionConfig& cfg) {
  std::vector<Var> out = grid_values;
  if (radar_pos.rows() == 0) return out;
  const std::vector<FrustumLink> links =
      frustum_links(cams, grid_shapes, radar_pos, cfg.frustum_pixel_radius);
  if (links.empty()) return out;
  Var wq = params("fr.wq"), wk = params("fr.wk"), wv = params("fr.wv"), wo = params("fr.wo");
  Var keys = matmul(radar_features, wk);
  Var vals = matmul(radar_features, wv);
  const MatX zero_dist_template = MatX::Zero(1, 1);
  std::vector<std::vector<Var>> updates(grid_values.size());
  std::vector<std::vector<int>> cells(grid_values.size());
  Var alpha0 = tape.constant(0.0);
  for (const FrustumLink& link : links) {
    Var q = matmul(gather_rows(grid_values[static_cast<size_t>(link.cam)], {link.cell}), wq);
    Var k = gather_rows(keys, link.radar);
    Var v = gather_rows(vals, link.radar);
    const MatX dist = MatX::Zero(1, static_cast<Eigen::Index>(link.radar.size()));
    Var attended = range_attention(q, k, v, alpha0, dist, cfg.r_max, 1);
    updates[static_cast<size_t>(link.cam)].push_back(matmul(attended, wo));
    cells[static_cast<size_t>(link.cam)].push_back(link.cell);
  }
  for (size_t c = 0; c < out.size(); ++c) {
    if (updates[c].empty()) continue;
    out[c] = scatter_rows_add(out[c], vcat(updates[c]), cells[c]);
  }
  (void)zero_dist_template;
  return out;
}

std::vector<FeatureGrid> frustum_cross_attention(const std::vector<FeatureGrid>& grids,
                                                 const std::vector<RadarFeature>& radar,
                                                 const std::vector<CameraModel>& cams,
                                                 const ParamStore& store,
                                                 const FusionConfig& cfg) {
  std::vector<FeatureGrid> out = grids;
  if (radar.empty()) return out;
  Tape tape(false);
  ParamBinding binding(tape, store);
  std::vector<Var> grid_vars;
  grid_vars.reserve(grids.size());
  for (const FeatureGrid& g : grids) grid_vars.push_back(tape.constant(g.values));
  MatX feats(static_cast<Eigen::Index>(radar.size()), radar[0].feature.size());
  MatX pos(static_cast<Eigen::Index>(radar.size()), 3);
  for (size_t i = 0; i < radar.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i)) = radar[i].feature.transpose();
    pos.row(static_cast<Eigen::Index>(i)) = radar[i].position.transpose();
  }
  const std::vector<Var> enriched = frustum_cross_attention_t(
      tape, binding, grid_vars, tape.constant(feats), pos, cams, grids, cfg);
  for (size_t c = 0; c < out.size(); ++c) out[c].values = enriched[c].value();
  return out;
}

VecX ego_query_init(const std::vector<FeatureGrid>& grids) {
  Eigen::Index total = 0;
  Eigen::Index channels = -1;
  for (const FeatureGrid& g : grids) {
    total += g.values.rows();
    if (g.values.rows() > 0) channels = g.values.cols();
  }
  if (total == 0) throw std::invalid_argument("ego_query_init: all grids empty");
  VecX acc = VecX::Zero(channels);
  for (const FeatureGrid& g : grids) {
    for (Eigen::Index i = 0; i < g.values.rows(); ++i) acc += g.values.row(i).transpose();
  }
  return acc / static_cast<Scalar>(total);
}

Var ego_query_init_t(Tape& tape, const std::vector<Var>& grid_values) {
  std::vector<Var> nonempty;
  Eigen::Index total = 0;
  for (const Var& g : grid_values) {
    if (g.value().rows() > 0) {
      nonempty.push_back(g);
      total += g.value().rows();
    }
  }
  if (total == 0) throw std::invalid_argument("ego_query_init: all grids empty");
  Var stacked = nonempty.size() == 1 ? nonempty[0] : vcat(nonempty);
  const MatX ones = MatX::Constant(1, total, 1.0 / static_cast<Scalar>(total));
  return matmul(tape.constant(ones), stacked);
}

}  // namespace rcf
