#include "svl/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svl/error.hpp"

namespace svl {

void NeuronConfig::validate() const {
  if (!(beta > 0.0 && beta <= 1.0))
    throw Error(err::kConfig, "neuron beta must lie in (0, 1], got " + std::to_string(beta));
  if (!(theta > 0.0)) throw Error(err::kConfig, "neuron theta must be positive");
  if (d_max < 1) throw Error(err::kConfig, "neuron d_max must be at least 1");
  if (!(a > 0.0)) throw Error(err::kConfig, "surrogate width a must be positive");
}

bool is_spike_tensor(const Tensor& t, int d_max) {
  for (double v : t.data()) {
    if (!(v >= 0.0 && v <= d_max) || v != std::nearbyint(v)) return false;
  }
  return true;
}

SpikeFeature::SpikeFeature(Tensor values, int d_max) : values_(std::move(values)), d_max_(d_max) {
  if (values_.rank() != 2)
    throw Error(err::kShape, "spike feature must be T x C, got " + shape_str(values_.shape()));
  if (d_max_ < 1) throw Error(err::kConfig, "spike feature d_max must be at least 1");
  if (!is_spike_tensor(values_, d_max_))
    throw Error(err::kDegenerate, "spike feature entries must be integers in [0, " +
                                      std::to_string(d_max_) + "]");
}

Tensor ilif_fire(const Tensor& u, int d_max) {
  const double hi = static_cast<double>(d_max);
  std::vector<double> s(u.size()), g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u[i];
    // nearbyint honours the default round-half-to-even mode.
    s[i] = std::nearbyint(std::clamp(x, 0.0, hi));
    g[i] = (x > 0.0 && x < hi) ? 1.0 : 0.0;
  }
  return custom_unary(u, std::move(s), std::move(g));
}

Tensor surrogate_rectangle(const Tensor& u, const NeuronConfig& cfg) {
  std::vector<double> g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    g[i] = std::abs(u[i] - cfg.theta) < cfg.a / 2.0 ? 1.0 / cfg.a : 0.0;
  return Tensor(u.shape(), std::move(g));
}

Tensor heaviside_fire(const Tensor& u, const NeuronConfig& cfg) {
  std::vector<double> s(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) s[i] = u[i] - cfg.theta >= 0.0 ? 1.0 : 0.0;
  return custom_unary(u, std::move(s), surrogate_rectangle(u, cfg).values());
}

Tensor fire(const Tensor& u, const NeuronConfig& cfg) {
  return cfg.mode == FireMode::heaviside ? heaviside_fire(u, cfg) : ilif_fire(u, cfg.d_max);
}

StepResult lif_step(const NeuronState& state, const Tensor& current, const NeuronConfig& cfg) {
  if (current.shape() != state.h.shape())
    throw Error(err::kShape, "current " + shape_str(current.shape()) +
                                 " does not match membrane " + shape_str(state.h.shape()));
  Tensor u = add(state.h, current);
  Tensor s = fire(u, cfg);
  std::vector<double> keep(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) keep[i] = s[i] > 0.0 ? 0.0 : cfg.beta;
  Tensor h = mul(u, Tensor(u.shape(), std::move(keep)));
  return {std::move(s), NeuronState{std::move(h), state.t + 1}};
}

SpikeFeature ilif_sequence(const std::vector<Tensor>& inputs, const NeuronConfig& cfg) {
  if (inputs.empty()) throw Error(err::kShape, "ilif_sequence needs at least one timestep");
  const std::size_t width = inputs[0].size();
  NeuronState state = NeuronState::zeros({width});
  std::vector<Tensor> spikes;
  spikes.reserve(inputs.size());
  for (const Tensor& x : inputs) {
    if (x.size() != width)
      throw Error(err::kShape, "ilif_sequence inputs must share one shape");
    auto step = lif_step(state, reshape(x, {width}), cfg);
    spikes.push_back(std::move(step.spikes));
    state = std::move(step.state);
  }
  return SpikeFeature(stack(spikes), cfg.max_spike());
}

Tensor expand_virtual(const SpikeFeature& f) {
  const std::size_t T = f.timesteps(), C = f.width();
  const std::size_t D = static_cast<std::size_t>(f.d_max());
  std::vector<double> out(T * D * C, 0.0);
  const Tensor& v = f.values();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const auto s = static_cast<std::size_t>(v[t * C + c]);
      for (std::size_t k = 0; k < s; ++k) out[(t * D + k) * C + c] = 1.0;
    }
  return Tensor({T * D, C}, std::move(out));
}

}  // namespace svl
