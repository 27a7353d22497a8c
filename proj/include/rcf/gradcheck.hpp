#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "rcf/types.hpp"

namespace rcf {

struct ScalarWithGrad {
  Scalar value = 0.0;
  VecX grad;
};

// Compares f's analytic gradient at x against central differences.
// Returns max over coordinates of |g_analytic - g_fd| / max(1e-8, |g_fd|).
// Throws std::invalid_argument when f evaluates non-finite or eps <= 0.
inline Scalar finite_difference_gradcheck(const std::function<ScalarWithGrad(const VecX&)>& f,
                                          const VecX& x, Scalar eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_gradcheck: eps must be > 0");
  const ScalarWithGrad at_x = f(x);
  if (!std::isfinite(at_x.value) || !at_x.grad.allFinite()) {
    throw std::invalid_argument("finite_difference_gradcheck: non-finite evaluation");
  }
  if (at_x.grad.size() != x.size()) {
    throw std::invalid_argument("finite_difference_gradcheck: gradient size mismatch");
  }
  Scalar worst = 0.0;
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + eps;
    const Scalar up = f(probe).value;
    probe(i) = x(i) - eps;
    const Scalar dn = f(probe).value;
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(dn)) {
      throw std::invalid_argument("finite_difference_gradcheck: non-finite evaluation");
    }
    const Scalar fd = (up - dn) / (2.0 * eps);
    const Scalar rel = std::abs(at_x.grad(i) - fd) / std::max(Scalar(1e-8), std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace rcf
