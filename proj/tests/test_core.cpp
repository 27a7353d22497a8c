#include <atomic>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rcf/parallel.hpp"
#include "rcf/params.hpp"
#include "rcf/rng.hpp"

using namespace rcf;

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("rng: uniform stays in bounds") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = r.uniform(-3.0, 5.0);
    CHECK(v >= -3.0);
    CHECK(v < 5.0);
    const int k = r.uniform_int(6);
    CHECK(k >= 0);
    CHECK(k < 6);
  }
}

TEST_CASE("rng: normal matches moments") {
  Rng r(11);
  const int n = 50000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng: bernoulli rate") {
  Rng r(5);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) hits += r.bernoulli(0.3);
  CHECK(std::abs(hits / 20000.0 - 0.3) < 0.02);
}

TEST_CASE("derive_seed: stable and part-sensitive") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
}

TEST_CASE("param store: create, lookup, counting") {
  ParamStore store;
  store.create("a.w", 2, 3);
  store.create("a.b", 1, 3);
  CHECK(store.has("a.w"));
  CHECK_FALSE(store.has("z"));
  CHECK(store.num_params() == 9);
  CHECK_THROWS_AS(store.create("a.w", 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(store.at("missing"), std::out_of_range);
}

TEST_CASE("param store: content hash is value, name, and shape sensitive") {
  ParamStore a, b;
  a.create("w", 2, 2);
  b.create("w", 2, 2);
  CHECK(a.content_hash() == b.content_hash());

  b.at("w")(1, 1) = 1e-12;
  CHECK(a.content_hash() != b.content_hash());

  ParamStore c, d;
  c.create("w", 1, 4);
  d.create("w", 4, 1);
  CHECK(c.content_hash() != d.content_hash());

  ParamStore e, f;
  e.create("w1", 2, 2);
  f.create("w2", 2, 2);
  CHECK(e.content_hash() != f.content_hash());
}

TEST_CASE("param store: init_normal is seed deterministic") {
  ParamStore a, b;
  Rng ra(9), rb(9);
  a.init_normal("w", 3, 4, ra, 0.5);
  b.init_normal("w", 3, 4, rb, 0.5);
  CHECK(a.at("w") == b.at("w"));
  CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("sgd: momentum and global norm clip, by hand") {
  ParamStore store;
  MatX& p = store.create("p", 1, 2);
  p << 1.0, 0.0;

  SgdConfig cfg;
  cfg.lr = 0.1;
  cfg.momentum = 0.5;
  cfg.clip_norm = 2.5;
  SgdOptimizer opt(cfg);

  MatX g(1, 2);
  g << 3.0, 4.0;  // norm 5 -> clip factor 0.5 -> effective (1.5, 2)
  opt.step(store, {{"p", g}});
  CHECK(store.at("p")(0, 0) == doctest::Approx(1.0 - 0.1 * 1.5).epsilon(1e-12));
  CHECK(store.at("p")(0, 1) == doctest::Approx(0.0 - 0.1 * 2.0).epsilon(1e-12));

  MatX zero = MatX::Zero(1, 2);
  opt.step(store, {{"p", zero}});  // velocity decays by momentum
  CHECK(store.at("p")(0, 0) == doctest::Approx(0.85 - 0.1 * 0.75).epsilon(1e-12));
  CHECK(store.at("p")(0, 1) == doctest::Approx(-0.2 - 0.1 * 1.0).epsilon(1e-12));
}

TEST_CASE("sgd: clip disabled leaves small gradients untouched") {
  ParamStore store;
  store.create("p", 1, 1);
  SgdConfig cfg;
  cfg.lr = 1.0;
  cfg.momentum = 0.0;
  cfg.clip_norm = 0.0;
  SgdOptimizer opt(cfg);
  MatX g(1, 1);
  g << 100.0;
  opt.step(store, {{"p", g}});
  CHECK(store.at("p")(0, 0) == doctest::Approx(-100.0));
}

TEST_CASE("sgd: non-finite gradient is rejected") {
  ParamStore store;
  store.create("p", 1, 1);
  SgdOptimizer opt(SgdConfig{});
  MatX g(1, 1);
  g << std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(store, {{"p", g}}), std::runtime_error);
}

TEST_CASE("param binding: one leaf per name, gradients read back") {
  ParamStore store;
  store.create("w", 2, 2) << 1, 2, 3, 4;
  Tape tape(true);
  ParamBinding bind(tape, store);
  Var a = bind("w");
  Var b = bind("w");
  CHECK(a.id == b.id);

  Var loss = sum(mul(a, b));  // sum w^2, d/dw = 2w
  tape.backward(loss);
  const auto grads = bind.grads();
  CHECK(grads.count("w") == 1);
  CHECK((grads.at("w") - 2.0 * store.at("w")).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("parallel_for: slot results equal serial for any worker count") {
  const int n = 37;
  std::vector<double> serial(n), parallel(n);
  for (int i = 0; i < n; ++i) serial[static_cast<size_t>(i)] = std::sqrt(i) + i * i;
  for (int workers : {1, 2, 3, 8, 64}) {
    std::fill(parallel.begin(), parallel.end(), -1.0);
    parallel_for(n, workers, [&](int i) {
      parallel[static_cast<size_t>(i)] = std::sqrt(i) + i * i;
    });
    CHECK(parallel == serial);
  }
}

TEST_CASE("parallel_for: n = 0 is a no-op") {
  std::atomic<int> calls{0};
  parallel_for(0, 4, [&](int) { calls++; });
  CHECK(calls == 0);
}

TEST_CASE("parallel_for: first exception propagates") {
  CHECK_THROWS_AS(
      parallel_for(16, 4,
                   [&](int i) {
                     if (i == 7) throw std::runtime_error("boom");
                   }),
      std::runtime_error);
}
