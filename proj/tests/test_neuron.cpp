#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "svl/error.hpp"
#include "svl/neuron.hpp"

using namespace svl;
using svl::testing::random_spikes;
using svl::testing::random_tensor;

namespace {

double fire1(double u, int d = 4) { return ilif_fire(Tensor({1}, {u}), d)[0]; }

Tensor to_tensor(const oracle::Matrix& m) {
  std::vector<double> v;
  for (const auto& r : m) v.insert(v.end(), r.begin(), r.end());
  return Tensor({m.size(), m[0].size()}, std::move(v));
}

}  // namespace

TEST_CASE("ilif_fire rounds and clips") {
  CHECK(fire1(0.4) == 0.0);
  CHECK(fire1(7.2) == 4.0);
  CHECK(fire1(-0.3) == 0.0);
  CHECK(fire1(2.6) == 3.0);
  // Half-to-even.
  CHECK(fire1(0.5) == 0.0);
  CHECK(fire1(1.5) == 2.0);
  CHECK(fire1(2.5) == 2.0);
}

TEST_CASE("ilif_fire outputs integers in [0, D]") {
  std::mt19937_64 rng(1);
  for (int d : {1, 2, 4, 8}) {
    const Tensor s = ilif_fire(random_tensor({200}, rng, -5, 15), d);
    CHECK(is_spike_tensor(s, d));
  }
}

TEST_CASE("straight-through gradient vanishes outside (0, D)") {
  const Tensor u({6}, {-1.0, 0.0, 0.3, 3.9, 4.0, 6.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  const auto g = tape.backward(sum_all(ilif_fire(u, 4))).get(u);
  CHECK(g == std::vector<double>{0, 0, 1, 1, 0, 0});
}

TEST_CASE("lif_step hand rollouts") {
  NeuronConfig cfg;
  cfg.beta = 0.5;
  cfg.d_max = 4;
  auto a = lif_step(NeuronState::zeros({1}), Tensor({1}, {1.2}), cfg);
  CHECK(a.spikes[0] == 1.0);
  CHECK(a.state.h[0] == 0.0);
  CHECK(a.state.t == 1);
  auto b = lif_step(NeuronState::zeros({1}), Tensor({1}, {0.3}), cfg);
  CHECK(b.spikes[0] == 0.0);
  CHECK(b.state.h[0] == doctest::Approx(0.15).epsilon(1e-15));
  auto c = lif_step(NeuronState::zeros({1}), Tensor({1}, {0.0}), cfg);
  CHECK(c.spikes[0] == 0.0);
  CHECK(c.state.h[0] == 0.0);
  CHECK_THROWS_AS(lif_step(NeuronState::zeros({2}), Tensor({1}, {0.0}), cfg), Error);
}

TEST_CASE("hard reset zeroes the membrane after any emission") {
  NeuronConfig cfg;
  std::mt19937_64 rng(2);
  NeuronState st = NeuronState::zeros({64});
  for (int t = 0; t < 10; ++t) {
    auto r = lif_step(st, random_tensor({64}, rng, -1, 6), cfg);
    for (std::size_t i = 0; i < 64; ++i)
      if (r.spikes[i] > 0) CHECK(r.state.h[i] == 0.0);
    st = r.state;
  }
}

TEST_CASE("ilif_sequence") {
  NeuronConfig cfg;
  const SpikeFeature one = ilif_sequence({Tensor({1}, {1.2})}, cfg);
  CHECK(one.values().values() == std::vector<double>{1});
  const SpikeFeature two = ilif_sequence({Tensor({1}, {0.3}), Tensor({1}, {0.3})}, cfg);
  CHECK(two.values().values() == std::vector<double>{0, 0});
  const SpikeFeature zero = ilif_sequence({Tensor::zeros({3}), Tensor::zeros({3})}, cfg);
  CHECK(zero.values().values() == std::vector<double>(6, 0.0));
  CHECK_THROWS_AS(ilif_sequence({}, cfg), Error);
}

TEST_CASE("surrogate_rectangle") {
  NeuronConfig cfg;
  cfg.theta = 1.0;
  cfg.a = 1.0;
  CHECK(surrogate_rectangle(Tensor({1}, {1.0}), cfg)[0] == 1.0);
  CHECK(surrogate_rectangle(Tensor({1}, {1.6}), cfg)[0] == 0.0);
  cfg.a = 2.0;
  CHECK(surrogate_rectangle(Tensor({1}, {0.6}), cfg)[0] == 0.5);

  // With D = 1 threshold firing the backward rule is the rectangle window.
  cfg.a = 1.0;
  cfg.mode = FireMode::heaviside;
  std::vector<double> grid;
  for (int i = -20; i <= 40; ++i) grid.push_back(i * 0.05);
  const Tensor u({grid.size()}, grid, true);
  Tape tape;
  Tape::Scope scope(tape);
  const auto g = tape.backward(sum_all(fire(u, cfg))).get(u);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double expect = std::abs(grid[i] - 1.0) < 0.5 ? 1.0 : 0.0;
    CHECK(g[i] == expect);
    CHECK(fire(Tensor({1}, {grid[i]}), cfg)[0] == (grid[i] >= 1.0 ? 1.0 : 0.0));
  }
}

TEST_CASE("expand_virtual") {
  const Tensor e = expand_virtual(SpikeFeature(Tensor({1, 1}, {3}), 4));
  CHECK(e.shape() == Shape{4, 1});
  CHECK(e.values() == std::vector<double>{1, 1, 1, 0});
  CHECK(expand_virtual(SpikeFeature(Tensor({1, 1}, {0}), 4)).values() ==
        std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(SpikeFeature(Tensor({1, 1}, {1.5}), 4), Error);
  CHECK_THROWS_AS(SpikeFeature(Tensor({1, 1}, {5}), 4), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 4;
    const std::size_t t = 1 + trial % 3, c = 5;
    const SpikeFeature f(random_spikes({t, c}, d, rng), d);
    const Tensor x = expand_virtual(f);
    // Block sums recover the counts exactly.
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t ci = 0; ci < c; ++ci) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += x[(ti * d + k) * c + ci];
        CHECK(s == f.values()[ti * c + ci]);
      }
    // Linear equivalence.
    const Tensor w = random_tensor({c, 3}, rng);
    const Tensor a = sum(matmul(f.values(), w), 0);
    const Tensor b = sum(matmul(x, w), 0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-9);
  }
}

TEST_CASE("config validation") {
  NeuronConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = NeuronConfig{};
  cfg.d_max = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = NeuronConfig{};
  cfg.a = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("BPTT gradients match the explicit double sum") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const oracle::BpttCase bc = oracle::random_bptt_case(seed);
    const oracle::BpttGrads want = oracle::bptt_oracle(bc);

    NeuronConfig cfg;
    cfg.beta = bc.beta;
    cfg.d_max = bc.d_max;
    const Tensor w1(Shape{4, 4}, to_tensor(bc.w1).values(), true);
    const Tensor w2(Shape{4, 4}, to_tensor(bc.w2).values(), true);
    const Tensor x = to_tensor(bc.x), c = to_tensor(bc.c);
    Tape tape;
    Tape::Scope scope(tape);
    NeuronState h1 = NeuronState::zeros({1, 4}), h2 = NeuronState::zeros({1, 4});
    std::vector<Tensor> out;
    for (std::size_t t = 0; t < bc.steps; ++t) {
      auto r1 = lif_step(h1, matmul(reshape(row(x, t), {1, 4}), w1), cfg);
      auto r2 = lif_step(h2, matmul(r1.spikes, w2), cfg);
      h1 = r1.state;
      h2 = r2.state;
      out.push_back(reshape(r2.spikes, {4}));
    }
    const Gradients g = tape.backward(sum_all(mul(stack(out), c)));
    const auto g1 = g.get(w1), g2 = g.get(w2);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(g1[i * 4 + j] - want.w1[i][j]) < 1e-9);
        CHECK(std::abs(g2[i * 4 + j] - want.w2[i][j]) < 1e-9);
      }
  }
}
