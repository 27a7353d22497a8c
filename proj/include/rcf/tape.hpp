#pragma once

#include <functional>
#include <vector>

#include "rcf/types.hpp"

namespace rcf {

class Tape;

// Handle to a matrix-valued node on a tape. Scalars are 1x1 matrices,
// vectors are Nx1. Copyable; lifetime tied to the owning tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const MatX& value() const;
  MatX grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

// Minimal reverse-mode tape over Eigen matrices. Covers exactly the
// operations used by the trainable pipeline; each op's backward is verified
// against central differences in the tests.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(const MatX& value, bool requires_grad = true);
  Var constant(const MatX& value) { return leaf(value, false); }
  Var constant(Scalar value) {
    MatX m(1, 1);
    m(0, 0) = value;
    return leaf(m, false);
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node
  // reachable from `loss` (a 1x1 node). Clears previous gradients first.
  void backward(const Var& loss);

  const MatX& value(int id) const { return nodes_[id].value; }
  // Gradient of a node after backward; zero matrix if the node was not reached.
  MatX grad_of(int id) const;

  size_t size() const { return nodes_.size(); }

  // Low-level hooks for fused ops: `pull` receives this node's gradient and
  // must push contributions into parents via accumulate_grad.
  Var make_node(MatX value, bool requires_grad, std::function<void(Tape&, const MatX&)> pull);
  void accumulate_grad(int id, const MatX& g);
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  friend struct Var;
  friend class TapeOps;

  // pull(tape, g) distributes this node's gradient g into its parents.
  struct Node {
    MatX value;
    MatX grad;
    bool requires_grad = false;
    std::function<void(Tape&, const MatX&)> pull;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// --- Elementwise / structural ops ---

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);        // elementwise, same shape
Var scale(Var a, Scalar c);
Var add_scalar(Var a, Scalar c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var log_op(Var a);            // requires strictly positive entries
Var pow_scalar(Var a, Scalar p);  // entries must keep a^p finite
Var softmax_rows(Var a);
Var layernorm_rows(Var a, Scalar eps = 1e-5);
Var sum(Var a);               // 1x1
Var mean(Var a);              // 1x1
Var gather_rows(Var a, const std::vector<int>& idx);
Var vcat(const std::vector<Var>& parts);
Var hcat(const std::vector<Var>& parts);
Var add_rowvec(Var a, Var row);   // broadcasts a 1xC row over all rows
Var mul_rowvec(Var a, Var row);   // elementwise, row broadcast over all rows
Var scale_rows(Var a, Var s);     // s is Nx1, scales row i by s(i)
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);  // row-major reinterpret
// base with updates.row(i) added into row idx[i]; duplicate indices accumulate.
Var scatter_rows_add(Var base, Var updates, const std::vector<int>& idx);

// Mean absolute difference to a constant target over all entries (1x1).
Var l1_to_constant(Var a, const MatX& target);

// Scaled dot-product attention with an additive distance penalty
// (-alpha * dist / r_max on the logits), multi-head over column groups,
// penalty applied identically per head. `dist` is a constant N_q x N_k
// matrix. Backward is analytic for q, k, v, and alpha.
Var range_attention(Var q, Var k, Var v, Var alpha, const MatX& dist, Scalar r_max,
                    int num_heads);

// Linear layer helper: x * W + b (b broadcast per row).
inline Var linear(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

}  // namespace rcf
