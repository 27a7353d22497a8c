#pragma once

#include "rcf/types.hpp"

namespace rcf {

// Euclidean distances between row-point sets (columns are coordinates;
// both inputs must have the same column count).
MatX pairwise_distances(const MatX& pos_q, const MatX& pos_k);

// Attention weight matrix of one head: softmax over keys of
// q_h k_h^T / sqrt(d_h) - alpha * dist / r_max. Rows sum to 1.
MatX range_attention_weights(const MatX& q, const MatX& k, const MatX& dist, Scalar alpha,
                             Scalar r_max, int num_heads, int head);

// Distance-penalized scaled dot-product attention over precomputed distances.
// Throws std::invalid_argument on an empty key set.
MatX range_adaptive_attention_dist(const MatX& q, const MatX& k, const MatX& v,
                                   const MatX& dist, Scalar alpha, Scalar r_max,
                                   int num_heads = 1);

// Same, with the distance matrix built from query/key positions (rows).
MatX range_adaptive_attention(const MatX& q, const MatX& k, const MatX& v, const MatX& pos_q,
                              const MatX& pos_k, Scalar alpha, Scalar r_max,
                              int num_heads = 1);

}  // namespace rcf
