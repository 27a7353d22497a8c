#pragma once

#include <vector>

#include "rcf/params.hpp"
#include "rcf/tape.hpp"
#include "rcf/types.hpp"

namespace rcf {

struct RadarFeature {
  VecX feature;
  Vec3 position = Vec3::Zero();
};

// Input vector for one radar point: position (range-normalized), RCS,
// Doppler, sweep offset, the BEV unit direction to the point, and the
// Doppler projected back onto that direction. Everything downstream sees
// agent motion only through these entries.
constexpr int kRadarInputDim = 10;
VecX radar_point_inputs(const RadarPoint& p, Scalar r_max);

// Registers the two-layer per-point encoder's tensors ("enc.*").
void init_encoder_params(ParamStore& store, int embed_dim, Rng& rng);

// Tape path: stacks inputs for all points and applies the shared MLP.
// Result is N x C. The input list must be non-empty.
Var encode_radar_points_t(Tape& tape, ParamBinding& params,
                          const std::vector<RadarPoint>& points, Scalar r_max);

// Plain path: one feature per point, deterministic given params.
// Throws std::invalid_argument on non-finite point attributes.
std::vector<RadarFeature> encode_radar_points(const std::vector<RadarPoint>& points,
                                              const ParamStore& store, Scalar r_max);

// Positions of encoded points as an N x 3 matrix.
MatX radar_positions(const std::vector<RadarPoint>& points);

}  // namespace rcf
