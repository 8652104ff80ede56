#pragma once

// Integer leaky integrate-and-fire neurons.
//
// During training a unit emits an integer count s = round(clip(u, 0, D)) per
// timestep. At inference the count is unrolled into D binary sub-steps so every
// downstream linear layer only accumulates weights.

#include <cstddef>
#include <vector>

#include "svl/autodiff.hpp"

namespace svl {

enum class FireMode {
  integer,    // round(clip(u, 0, D)) with a straight-through gradient
  heaviside,  // binary Theta(u - theta) with the rectangle surrogate
};

struct NeuronConfig {
  double beta = 0.5;   // membrane decay
  double theta = 1.0;  // threshold, heaviside mode only
  int d_max = 4;       // largest emitted integer
  double a = 1.0;      // rectangle surrogate window width
  FireMode mode = FireMode::integer;

  // Throws config_error when a field is outside its domain.
  void validate() const;
  // Largest value a spike can take under this config.
  int max_spike() const { return mode == FireMode::heaviside ? 1 : d_max; }
};

struct NeuronState {
  Tensor h;           // post-spike membrane potential
  std::size_t t = 0;  // timesteps consumed

  static NeuronState zeros(const Shape& shape) { return {Tensor::zeros(shape), 0}; }
};

// T x C tensor of integer spike counts in [0, D].
class SpikeFeature {
 public:
  // Throws degenerate_input when an entry is not an integer in [0, d_max].
  SpikeFeature(Tensor values, int d_max);

  const Tensor& values() const { return values_; }
  std::size_t timesteps() const { return values_.dim(0); }
  std::size_t width() const { return values_.dim(1); }
  int d_max() const { return d_max_; }

 private:
  Tensor values_;
  int d_max_;
};

// True when every entry is an integer in [0, d_max].
bool is_spike_tensor(const Tensor& t, int d_max);

Tensor ilif_fire(const Tensor& u, int d_max);

// Binary firing with dS/du given by surrogate_rectangle.
Tensor heaviside_fire(const Tensor& u, const NeuronConfig& cfg);

// Dispatches on cfg.mode.
Tensor fire(const Tensor& u, const NeuronConfig& cfg);

struct StepResult {
  Tensor spikes;
  NeuronState state;
};

// u = h + current; s = fire(u); h' = beta * u * (1 - [s > 0]).
// The reset gate is treated as a constant during backpropagation.
StepResult lif_step(const NeuronState& state, const Tensor& current, const NeuronConfig& cfg);

// Runs lif_step from h = 0 over the inputs and stacks the spikes into T x C.
SpikeFeature ilif_sequence(const std::vector<Tensor>& inputs, const NeuronConfig& cfg);

// (1/a) * [|u - theta| < a/2], elementwise.
Tensor surrogate_rectangle(const Tensor& u, const NeuronConfig& cfg);

// Each count s becomes D binary sub-steps, the first s of them set. The
// result has shape (T*D) x C with sub-step rows of timestep t at t*D .. t*D+D-1.
Tensor expand_virtual(const SpikeFeature& f);

}  // namespace svl
