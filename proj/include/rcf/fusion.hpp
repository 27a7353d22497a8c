#pragma once

#include <vector>

#include "rcf/encoder.hpp"
#include "rcf/params.hpp"
#include "rcf/tape.hpp"
#include "rcf/types.hpp"

namespace rcf {

// Indices of up to k nearest candidates with distance <= r_max, nearest
// first; ties broken by lowest index.
std::vector<int> topk_in_range(const VecX& dists, int k, Scalar r_max);

// Minimum BEV distance from each radar feature to each polyline.
// Result is num_polylines x num_radar.
MatX map_radar_distances(const std::vector<MapPolyline>& maps,
                         const std::vector<RadarFeature>& radar);

// Per-agent radar aggregation: each agent attends over its topk_radar
// nearest radar features (Euclidean distance to the anchor center) and the
// attended value is residually added to the agent feature. Agents with no
// radar in range pass through unchanged.
std::vector<AgentInstance> aggregate_agent_queries(const std::vector<AgentInstance>& agents,
                                                   const std::vector<RadarFeature>& radar,
                                                   const FusionConfig& cfg);

// As aggregate_agent_queries with polyline minimum distance as the
// proximity measure (both for neighbor selection and the attention penalty).
std::vector<MapPolyline> aggregate_map_queries(const std::vector<MapPolyline>& maps,
                                               const std::vector<RadarFeature>& radar,
                                               const FusionConfig& cfg);

// One grid cell that sees projected radar points, with the candidate list.
struct FrustumLink {
  int cam = 0;
  int cell = 0;
  std::vector<int> radar;
};

// Cells whose center pixel lies within pixel_radius of a projected radar
// point, per camera. Grid cell (r, c) covers the pixel block
// [c*W/gw, (c+1)*W/gw) x [r*H/gh, (r+1)*H/gh).
std::vector<FrustumLink> frustum_links(const std::vector<CameraModel>& cams,
                                       const std::vector<FeatureGrid>& grids,
                                       const MatX& radar_pos, Scalar pixel_radius);

// Registers frustum cross-attention tensors ("fr.*").
void init_frustum_params(ParamStore& store, int embed_dim, Rng& rng);

// Cells near projected radar points cross-attend to those radar features
// (residual update); everything else passes through unchanged.
std::vector<FeatureGrid> frustum_cross_attention(const std::vector<FeatureGrid>& grids,
                                                 const std::vector<RadarFeature>& radar,
                                                 const std::vector<CameraModel>& cams,
                                                 const ParamStore& store,
                                                 const FusionConfig& cfg);

// Tape path over grid feature matrices (one cells x C Var per camera).
std::vector<Var> frustum_cross_attention_t(Tape& tape, ParamBinding& params,
                                           const std::vector<Var>& grid_values,
                                           Var radar_features, const MatX& radar_pos,
                                           const std::vector<CameraModel>& cams,
                                           const std::vector<FeatureGrid>& grid_shapes,
                                           const FusionConfig& cfg);

// Mean over all cells of all camera grids. Throws when every grid is empty.
VecX ego_query_init(const std::vector<FeatureGrid>& grids);
Var ego_query_init_t(Tape& tape, const std::vector<Var>& grid_values);

}  // namespace rcf
