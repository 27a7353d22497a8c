#include "rcf/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace rcf {

MatX pairwise_distances(const MatX& pos_q, const MatX& pos_k) {
  if (pos_q.cols() != pos_k.cols()) {
    throw std::invalid_argument("pairwise_distances: coordinate dimension mismatch");
  }
  MatX d(pos_q.rows(), pos_k.rows());
  for (Eigen::Index i = 0; i < pos_q.rows(); ++i) {
    for (Eigen::Index j = 0; j < pos_k.rows(); ++j) {
      d(i, j) = (pos_q.row(i) - pos_k.row(j)).norm();
    }
  }
  return d;
}

MatX range_attention_weights(const MatX& q, const MatX& k, const MatX& dist, Scalar alpha,
                             Scalar r_max, int num_heads, int head) {
  if (k.rows() == 0) throw std::invalid_argument("range attention: empty key set");
  if (r_max <= 0.0) throw std::invalid_argument("range attention: r_max must be positive");
  if (num_heads < 1 || q.cols() % num_heads != 0) {
    throw std::invalid_argument("range attention: head count must divide feature dim");
  }
  if (head < 0 || head >= num_heads) throw std::invalid_argument("range attention: bad head");
  if (dist.rows() != q.rows() || dist.cols() != k.rows()) {
    throw std::invalid_argument("range attention: dist must be N_q x N_k");
  }
  const Eigen::Index dh = q.cols() / num_heads;
  MatX s = q.middleCols(head * dh, dh) * k.middleCols(head * dh, dh).transpose() /
           std::sqrt(static_cast<Scalar>(dh));
  s -= (alpha / r_max) * dist;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

MatX range_adaptive_attention_dist(const MatX& q, const MatX& k, const MatX& v,
                                   const MatX& dist, Scalar alpha, Scalar r_max,
                                   int num_heads) {
  if (k.rows() != v.rows()) throw std::invalid_argument("range attention: k/v row mismatch");
  if (v.cols() % num_heads != 0) {
    throw std::invalid_argument("range attention: head count must divide value dim");
  }
  const Eigen::Index dvh = v.cols() / num_heads;
  MatX out(q.rows(), v.cols());
  for (int h = 0; h < num_heads; ++h) {
    const MatX w = range_attention_weights(q, k, dist, alpha, r_max, num_heads, h);
    out.middleCols(h * dvh, dvh) = w * v.middleCols(h * dvh, dvh);
  }
  return out;
}

MatX range_adaptive_attention(const MatX& q, const MatX& k, const MatX& v, const MatX& pos_q,
                              const MatX& pos_k, Scalar alpha, Scalar r_max, int num_heads) {
  return range_adaptive_attention_dist(q, k, v, pairwise_distances(pos_q, pos_k), alpha,
                                       r_max, num_heads);
}

}  // namespace rcf
