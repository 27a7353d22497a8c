#include "rcf/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace rcf {

MatX& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (has(name)) throw std::invalid_argument("ParamStore::create: duplicate tensor " + name);
  return tensors_[name] = MatX::Zero(rows, cols);
}

MatX& ParamStore::init_normal(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                              Rng& rng, Scalar stddev) {
  MatX& m = create(name, rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  }
  return m;
}

MatX& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("ParamStore: unknown tensor " + name);
  return it->second;
}

const MatX& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("ParamStore: unknown tensor " + name);
  return it->second;
}

std::size_t ParamStore::num_params() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::uint64_t ParamStore::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix_bytes = [&h](const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, m] : tensors_) {
    mix_bytes(name.data(), name.size());
    const std::int64_t dims[2] = {m.rows(), m.cols()};
    mix_bytes(dims, sizeof(dims));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const Scalar v = m(i);
      mix_bytes(&v, sizeof(v));
    }
  }
  return h;
}

Var ParamBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(store_->at(name), true);
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, MatX> ParamBinding::grads() const {
  std::map<std::string, MatX> out;
  for (const auto& [name, var] : bound_) out[name] = var.grad();
  return out;
}

void SgdOptimizer::step(ParamStore& store, const std::map<std::string, MatX>& grads) {
  Scalar norm_sq = 0.0;
  for (const auto& [name, g] : grads) norm_sq += g.squaredNorm();
  Scalar factor = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const Scalar norm = std::sqrt(norm_sq);
    if (norm > cfg_.clip_norm) factor = cfg_.clip_norm / norm;
  }
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) throw std::runtime_error("SgdOptimizer: non-finite gradient for " + name);
    MatX& vel = velocity_[name];
    if (vel.size() == 0) vel = MatX::Zero(g.rows(), g.cols());
    vel = cfg_.momentum * vel + factor * g;
    store.at(name) -= cfg_.lr * vel;
  }
}

}  // namespace rcf
