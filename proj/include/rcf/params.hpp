#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rcf/rng.hpp"
#include "rcf/tape.hpp"
#include "rcf/types.hpp"

namespace rcf {

// Named tensor store for all learnable weights. Iteration order is the
// lexicographic name order (std::map), which makes updates, hashing, and
// serialization deterministic.
class ParamStore {
 public:
  MatX& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  MatX& init_normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng,
                    Scalar stddev);

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  MatX& at(const std::string& name);
  const MatX& at(const std::string& name) const;

  const std::map<std::string, MatX>& tensors() const { return tensors_; }
  std::map<std::string, MatX>& tensors() { return tensors_; }

  std::size_t num_params() const;

  // FNV-1a over names, shapes, and raw value bytes; stable across runs.
  std::uint64_t content_hash() const;

 private:
  std::map<std::string, MatX> tensors_;
};

// Lazily leafs store tensors onto a tape, once per name, so the gradients of
// a backward pass can be read back per parameter.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

  Var operator()(const std::string& name);

  // Gradients for every bound parameter (zero if untouched by backward).
  std::map<std::string, MatX> grads() const;

 private:
  Tape* tape_;
  const ParamStore* store_;
  std::map<std::string, Var> bound_;
};

struct SgdConfig {
  Scalar lr = 0.05;
  Scalar momentum = 0.9;
  Scalar clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& store, const std::map<std::string, MatX>& grads);

 private:
  SgdConfig cfg_;
  std::map<std::string, MatX> velocity_;
};

}  // namespace rcf
