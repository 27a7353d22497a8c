#include "rcf/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace rcf {

const MatX& Var::value() const { return tape->value(id); }

MatX Var::grad() const { return tape->grad_of(id); }

Var Tape::leaf(const MatX& value, bool requires_grad) {
  Node n;
  n.value = value;
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

MatX Tape::grad_of(int id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) return MatX::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::make_node(MatX value, bool requires_grad, std::function<void(Tape&, const MatX&)> pull) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate_grad(int id, const MatX& g) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = MatX::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::backward(const Var& loss) {
  if (!grad_enabled_) throw std::logic_error("Tape::backward: gradients disabled");
  if (loss.value().rows() != 1 || loss.value().cols() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be 1x1");
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = MatX::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.pull) continue;
    n.pull(*this, n.grad);
  }
}

// Internal access for the op implementations.
class TapeOps {
 public:
  static bool needs_grad(const Var& v) { return v.tape->nodes_[v.id].requires_grad; }

  static MatX& gref(Tape& t, int id) {
    Tape::Node& n = t.nodes_[id];
    if (n.grad.size() == 0) n.grad = MatX::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  static Var make(Tape& t, MatX value, bool requires_grad,
                  std::function<void(Tape&, const MatX&)> pull) {
    Tape::Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && t.grad_enabled();
    if (n.requires_grad) n.pull = std::move(pull);
    t.nodes_.push_back(std::move(n));
    return Var{&t, static_cast<int>(t.nodes_.size()) - 1};
  }
};

namespace {

bool req(const Var& v) { return TapeOps::needs_grad(v); }

MatX& gref(Tape& t, int id) { return TapeOps::gref(t, id); }

void check_same_shape(const MatX& a, const MatX& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

void check_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": mixed tapes");
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  const bool ra = req(a), rb = req(b);
  return TapeOps::make(*a.tape, a.value() + b.value(), ra || rb,
                       [=](Tape& t, const MatX& g) {
                         if (ra) gref(t, ia) += g;
                         if (rb) gref(t, ib) += g;
                       });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  const bool ra = req(a), rb = req(b);
  return TapeOps::make(*a.tape, a.value() - b.value(), ra || rb,
                       [=](Tape& t, const MatX& g) {
                         if (ra) gref(t, ia) += g;
                         if (rb) gref(t, ib) -= g;
                       });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  check_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  const bool ra = req(a), rb = req(b);
  const MatX av = a.value(), bv = b.value();
  return TapeOps::make(*a.tape, av.cwiseProduct(bv), ra || rb,
                       [=](Tape& t, const MatX& g) {
                         if (ra) gref(t, ia) += g.cwiseProduct(bv);
                         if (rb) gref(t, ib) += g.cwiseProduct(av);
                       });
}

Var scale(Var a, Scalar c) {
  const int ia = a.id;
  const bool ra = req(a);
  return TapeOps::make(*a.tape, a.value() * c, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g * c;
  });
}

Var add_scalar(Var a, Scalar c) {
  const int ia = a.id;
  const bool ra = req(a);
  return TapeOps::make(*a.tape, a.value().array() + c, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g;
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  const int ia = a.id, ib = b.id;
  const bool ra = req(a), rb = req(b);
  const MatX av = a.value(), bv = b.value();
  return TapeOps::make(*a.tape, av * bv, ra || rb, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g * bv.transpose();
    if (rb) gref(t, ib) += av.transpose() * g;
  });
}

Var transpose(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  return TapeOps::make(*a.tape, a.value().transpose(), ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g.transpose();
  });
}

Var relu(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX av = a.value();
  return TapeOps::make(*a.tape, av.cwiseMax(0.0), ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g.cwiseProduct((av.array() > 0.0).cast<Scalar>().matrix());
  });
}

Var sigmoid(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX s = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return TapeOps::make(*a.tape, s, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g.cwiseProduct((s.array() * (1.0 - s.array())).matrix());
  });
}

Var tanh_op(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX y = a.value().array().tanh().matrix();
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var log_op(Var a) {
  if ((a.value().array() <= 0.0).any()) {
    throw std::invalid_argument("log_op: entries must be strictly positive");
  }
  const int ia = a.id;
  const bool ra = req(a);
  const MatX av = a.value();
  return TapeOps::make(*a.tape, av.array().log().matrix(), ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g.cwiseQuotient(av);
  });
}

Var pow_scalar(Var a, Scalar p) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX av = a.value();
  const MatX y = av.array().pow(p).matrix();
  if (!y.allFinite()) throw std::invalid_argument("pow_scalar: non-finite result");
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    MatX d(av.rows(), av.cols());
    for (Eigen::Index i = 0; i < av.size(); ++i) {
      const Scalar x = av(i);
      d(i) = (x == 0.0 && p < 1.0) ? 0.0 : p * std::pow(x, p - 1.0);
    }
    gref(t, ia) += g.cwiseProduct(d);
  });
}

Var softmax_rows(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX& av = a.value();
  MatX y(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const Scalar m = av.row(i).maxCoeff();
    y.row(i) = (av.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    MatX& ga = gref(t, ia);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const Scalar dot = g.row(i).dot(y.row(i));
      ga.row(i) += (y.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
  });
}

Var layernorm_rows(Var a, Scalar eps) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX& av = a.value();
  const Eigen::Index n = av.cols();
  MatX y(av.rows(), n);
  VecX inv_std(av.rows());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const Scalar mu = av.row(i).mean();
    const Scalar var = (av.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = (av.row(i).array() - mu) * inv_std(i);
  }
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    MatX& ga = gref(t, ia);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const Scalar gm = g.row(i).mean();
      const Scalar gy = g.row(i).cwiseProduct(y.row(i)).mean();
      ga.row(i) +=
          inv_std(i) * (g.row(i).array() - gm - y.row(i).array() * gy).matrix();
    }
    (void)n;
  });
}

Var sum(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const Eigen::Index r = a.value().rows(), c = a.value().cols();
  MatX y(1, 1);
  y(0, 0) = a.value().sum();
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia).array() += g(0, 0);
    (void)r;
    (void)c;
  });
}

Var mean(Var a) {
  const int ia = a.id;
  const bool ra = req(a);
  const Scalar n = static_cast<Scalar>(a.value().size());
  MatX y(1, 1);
  y(0, 0) = a.value().mean();
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia).array() += g(0, 0) / n;
  });
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  const int ia = a.id;
  const bool ra = req(a);
  const MatX& av = a.value();
  MatX y(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= av.rows()) {
      throw std::invalid_argument("gather_rows: index out of range");
    }
    y.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  std::vector<int> ids = idx;
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    MatX& ga = gref(t, ia);
    for (size_t i = 0; i < ids.size(); ++i) {
      ga.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: empty part list");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].value().cols();
  bool rg = false;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p, "vcat");
    if (p.value().cols() != cols) throw std::invalid_argument("vcat: column mismatch");
    rows += p.value().rows();
    rg = rg || req(p);
  }
  MatX y(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, sizes;
  std::vector<bool> reqs;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleRows(at, p.value().rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(at);
    sizes.push_back(p.value().rows());
    reqs.push_back(req(p));
    at += p.value().rows();
  }
  return TapeOps::make(t, y, rg, [=](Tape& tp, const MatX& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (reqs[i]) gref(tp, ids[i]) += g.middleRows(offsets[i], sizes[i]);
    }
  });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: empty part list");
  Tape& t = *parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].value().rows();
  bool rg = false;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p, "hcat");
    if (p.value().rows() != rows) throw std::invalid_argument("hcat: row mismatch");
    cols += p.value().cols();
    rg = rg || req(p);
  }
  MatX y(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets, sizes;
  std::vector<bool> reqs;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.value().cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(at);
    sizes.push_back(p.value().cols());
    reqs.push_back(req(p));
    at += p.value().cols();
  }
  return TapeOps::make(t, y, rg, [=](Tape& tp, const MatX& g) {
    for (size_t i = 0; i < ids.size(); ++i) {
      if (reqs[i]) gref(tp, ids[i]) += g.middleCols(offsets[i], sizes[i]);
    }
  });
}

Var add_rowvec(Var a, Var row) {
  check_same_tape(a, row, "add_rowvec");
  if (row.value().rows() != 1 || row.value().cols() != a.value().cols()) {
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
  }
  const int ia = a.id, ir = row.id;
  const bool ra = req(a), rr = req(row);
  MatX y = a.value();
  y.rowwise() += row.value().row(0);
  return TapeOps::make(*a.tape, y, ra || rr, [=](Tape& t, const MatX& g) {
    if (ra) gref(t, ia) += g;
    if (rr) gref(t, ir) += g.colwise().sum();
  });
}

Var mul_rowvec(Var a, Var row) {
  check_same_tape(a, row, "mul_rowvec");
  if (row.value().rows() != 1 || row.value().cols() != a.value().cols()) {
    throw std::invalid_argument("mul_rowvec: row must be 1 x cols(a)");
  }
  const int ia = a.id, ir = row.id;
  const bool ra = req(a), rr = req(row);
  const MatX av = a.value();
  const MatX rv = row.value();
  MatX y = av;
  y.array().rowwise() *= rv.row(0).array();
  return TapeOps::make(*a.tape, y, ra || rr, [=](Tape& t, const MatX& g) {
    if (ra) {
      MatX ga = g;
      ga.array().rowwise() *= rv.row(0).array();
      gref(t, ia) += ga;
    }
    if (rr) gref(t, ir) += g.cwiseProduct(av).colwise().sum();
  });
}

Var scale_rows(Var a, Var s) {
  check_same_tape(a, s, "scale_rows");
  if (s.value().cols() != 1 || s.value().rows() != a.value().rows()) {
    throw std::invalid_argument("scale_rows: s must be rows(a) x 1");
  }
  const int ia = a.id, is = s.id;
  const bool ra = req(a), rs = req(s);
  const MatX av = a.value();
  const MatX sv = s.value();
  MatX y = av;
  y.array().colwise() *= sv.col(0).array();
  return TapeOps::make(*a.tape, y, ra || rs, [=](Tape& t, const MatX& g) {
    if (ra) {
      MatX ga = g;
      ga.array().colwise() *= sv.col(0).array();
      gref(t, ia) += ga;
    }
    if (rs) gref(t, is) += g.cwiseProduct(av).rowwise().sum();
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const MatX& av = a.value();
  if (rows * cols != av.size()) throw std::invalid_argument("reshape: size mismatch");
  const int ia = a.id;
  const bool ra = req(a);
  const Eigen::Index ac = av.cols();
  MatX y(rows, cols);
  for (Eigen::Index k = 0; k < av.size(); ++k) {
    y(k / cols, k % cols) = av(k / ac, k % ac);
  }
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    MatX& ga = gref(t, ia);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      ga(k / ac, k % ac) += g(k / cols, k % cols);
    }
  });
}

Var scatter_rows_add(Var base, Var updates, const std::vector<int>& idx) {
  check_same_tape(base, updates, "scatter_rows_add");
  if (static_cast<Eigen::Index>(idx.size()) != updates.value().rows() ||
      updates.value().cols() != base.value().cols()) {
    throw std::invalid_argument("scatter_rows_add: shape mismatch");
  }
  const int ib = base.id, iu = updates.id;
  const bool rb = req(base), ru = req(updates);
  MatX y = base.value();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= y.rows()) {
      throw std::invalid_argument("scatter_rows_add: index out of range");
    }
    y.row(idx[i]) += updates.value().row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> ids = idx;
  return TapeOps::make(*base.tape, y, rb || ru, [=](Tape& t, const MatX& g) {
    if (rb) gref(t, ib) += g;
    if (ru) {
      MatX& gu = gref(t, iu);
      for (size_t i = 0; i < ids.size(); ++i) {
        gu.row(static_cast<Eigen::Index>(i)) += g.row(ids[i]);
      }
    }
  });
}

Var l1_to_constant(Var a, const MatX& target) {
  check_same_shape(a.value(), target, "l1_to_constant");
  const int ia = a.id;
  const bool ra = req(a);
  const MatX diff = a.value() - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  MatX y(1, 1);
  y(0, 0) = diff.cwiseAbs().mean();
  return TapeOps::make(*a.tape, y, ra, [=](Tape& t, const MatX& g) {
    if (!ra) return;
    gref(t, ia) += (g(0, 0) / n) * diff.array().sign().matrix();
  });
}

Var range_attention(Var q, Var k, Var v, Var alpha, const MatX& dist, Scalar r_max,
                    int num_heads) {
  check_same_tape(q, k, "range_attention");
  check_same_tape(q, v, "range_attention");
  check_same_tape(q, alpha, "range_attention");
  const MatX qv = q.value(), kv = k.value(), vv = v.value();
  const Eigen::Index nq = qv.rows(), nk = kv.rows(), d = qv.cols();
  if (nk == 0) throw std::invalid_argument("range_attention: empty key set");
  if (kv.cols() != d || vv.rows() != nk) {
    throw std::invalid_argument("range_attention: q/k/v shape mismatch");
  }
  if (vv.cols() % num_heads != 0 || d % num_heads != 0 || num_heads < 1) {
    throw std::invalid_argument("range_attention: head count must divide dims");
  }
  if (dist.rows() != nq || dist.cols() != nk) {
    throw std::invalid_argument("range_attention: dist must be N_q x N_k");
  }
  if (r_max <= 0.0) throw std::invalid_argument("range_attention: r_max must be positive");
  if (alpha.value().size() != 1) {
    throw std::invalid_argument("range_attention: alpha must be 1x1");
  }
  const Scalar av = alpha.value()(0, 0);
  const Eigen::Index dh = d / num_heads;
  const Eigen::Index dvh = vv.cols() / num_heads;
  const Scalar inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(dh));
  const MatX penalty = (av / r_max) * dist;

  MatX out(nq, vv.cols());
  std::vector<MatX> weights(static_cast<size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    MatX s = qv.middleCols(h * dh, dh) * kv.middleCols(h * dh, dh).transpose() * inv_sqrt;
    s -= penalty;
    MatX w(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i) {
      const Scalar m = s.row(i).maxCoeff();
      w.row(i) = (s.row(i).array() - m).exp();
      w.row(i) /= w.row(i).sum();
    }
    out.middleCols(h * dvh, dvh) = w * vv.middleCols(h * dvh, dvh);
    weights[static_cast<size_t>(h)] = std::move(w);
  }

  const int iq = q.id, ik = k.id, iv = v.id, ial = alpha.id;
  const bool rq = req(q), rk = req(k), rv = req(v), ral = req(alpha);
  const bool rg = rq || rk || rv || ral;
  const MatX dist_scaled = dist / r_max;
  return TapeOps::make(*q.tape, out, rg, [=](Tape& t, const MatX& g) {
    for (int h = 0; h < num_heads; ++h) {
      const MatX& w = weights[static_cast<size_t>(h)];
      const auto qh = qv.middleCols(h * dh, dh);
      const auto kh = kv.middleCols(h * dh, dh);
      const auto vh = vv.middleCols(h * dvh, dvh);
      const auto gh = g.middleCols(h * dvh, dvh);
      if (rv) gref(t, iv).middleCols(h * dvh, dvh) += w.transpose() * gh;
      if (!rq && !rk && !ral) continue;
      const MatX dw = gh * vh.transpose();
      MatX ds(w.rows(), w.cols());
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const Scalar dot = dw.row(i).dot(w.row(i));
        ds.row(i) = w.row(i).cwiseProduct((dw.row(i).array() - dot).matrix());
      }
      if (rq) gref(t, iq).middleCols(h * dh, dh) += ds * kh * inv_sqrt;
      if (rk) gref(t, ik).middleCols(h * dh, dh) += ds.transpose() * qh * inv_sqrt;
      if (ral) gref(t, ial)(0, 0) -= ds.cwiseProduct(dist_scaled).sum();
    }
  });
}

}  // namespace rcf
