#include "rcf/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace rcf {

VecX radar_point_inputs(const RadarPoint& p, Scalar r_max) {
  if (!p.position.allFinite() || !std::isfinite(p.rcs) || !std::isfinite(p.doppler) ||
      !std::isfinite(p.sweep_offset)) {
    throw std::invalid_argument("radar_point_inputs: non-finite point attribute");
  }
  const Scalar range = p.position.head<2>().norm();
  const Scalar ux = range > 1e-9 ? p.position.x() / range : 0.0;
  const Scalar uy = range > 1e-9 ? p.position.y() / range : 0.0;
  VecX in(kRadarInputDim);
  in << p.position.x() / r_max, p.position.y() / r_max, p.position.z(), p.rcs / 10.0,
      p.doppler / 10.0, p.sweep_offset, ux, uy, p.doppler * ux / 10.0, p.doppler * uy / 10.0;
  return in;
}

void init_encoder_params(ParamStore& store, int embed_dim, Rng& rng) {
  const Scalar s1 = 1.0 / std::sqrt(static_cast<Scalar>(kRadarInputDim));
  const Scalar s2 = 1.0 / std::sqrt(static_cast<Scalar>(embed_dim));
  store.init_normal("enc.w1", kRadarInputDim, embed_dim, rng, s1);
  store.create("enc.b1", 1, embed_dim);
  store.init_normal("enc.w2", embed_dim, embed_dim, rng, s2);
  store.create("enc.b2", 1, embed_dim);
}

namespace {

MatX stack_inputs(const std::vector<RadarPoint>& points, Scalar r_max) {
  MatX in(static_cast<Eigen::Index>(points.size()), kRadarInputDim);
  for (size_t i = 0; i < points.size(); ++i) {
    in.row(static_cast<Eigen::Index>(i)) = radar_point_inputs(points[i], r_max).transpose();
  }
  return in;
}

}  // namespace

Var encode_radar_points_t(Tape& tape, ParamBinding& params,
                          const std::vector<RadarPoint>& points, Scalar r_max) {
  if (points.empty()) throw std::invalid_argument("encode_radar_points_t: empty point list");
  Var in = tape.constant(stack_inputs(points, r_max));
  Var h = relu(linear(in, params("enc.w1"), params("enc.b1")));
  return layernorm_rows(linear(h, params("enc.w2"), params("enc.b2")));
}

std::vector<RadarFeature> encode_radar_points(const std::vector<RadarPoint>& points,
                                              const ParamStore& store, Scalar r_max) {
  std::vector<RadarFeature> out;
  if (points.empty()) return out;
  Tape tape(false);
  ParamBinding binding(tape, store);
  const MatX features = encode_radar_points_t(tape, binding, points, r_max).value();
  out.resize(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    out[i].feature = features.row(static_cast<Eigen::Index>(i)).transpose();
    out[i].position = points[i].position;
  }
  return out;
}

MatX radar_positions(const std::vector<RadarPoint>& points) {
  MatX pos(static_cast<Eigen::Index>(points.size()), 3);
  for (size_t i = 0; i < points.size(); ++i) {
    pos.row(static_cast<Eigen::Index>(i)) = points[i].position.transpose();
  }
  return pos;
}

}  // namespace rcf
