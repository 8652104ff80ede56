#pragma once

// Spike-based point-cloud encoders.
//
// Both variants run T timesteps over the same input with membrane state
// carried across timesteps, emit a T x H integer spike feature, and project
// each timestep's spikes to the shared embedding width C with a non-spiking
// linear map (an accumulate-only layer, since its inputs are spikes).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svl/autodiff.hpp"
#include "svl/energy.hpp"
#include "svl/geometry.hpp"
#include "svl/neuron.hpp"

namespace svl {

enum class EncoderVariant { pointnet, pointformer };

const char* to_string(EncoderVariant v);
EncoderVariant encoder_variant_from(const std::string& name);

struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::pointnet;
  std::size_t n_centers = 32;              // tokens after FPS (pointformer)
  std::size_t k = 8;                       // neighbours per token (pointformer)
  std::vector<std::size_t> dims{64, 128};  // shared MLP widths
  std::size_t depth = 1;                   // spike-driven transformer layers
  std::size_t heads = 1;
  std::size_t embed_dim = 512;
  std::size_t timesteps = 1;
  std::size_t in_features = 0;  // extra per-point channels beyond xyz
  NeuronConfig neuron;

  void validate() const;
  std::size_t width() const { return dims.back(); }
  // Input channels of the first MLP layer.
  std::size_t input_dim() const;
};

using ParamMap = std::map<std::string, Tensor>;

struct EncoderParams {
  ParamMap tensors;

  const Tensor& at(const std::string& name) const;
};

// Parameter names and shapes the config requires, in a stable order.
std::vector<std::pair<std::string, Shape>> encoder_layout(const EncoderConfig& cfg);

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

// Throws shape_mismatch when params do not match the config layout.
void check_params(const EncoderParams& params, const EncoderConfig& cfg);

// Fresh leaves with requires_grad set, for one training step.
EncoderParams trainable(const EncoderParams& params);

enum class SpikePath {
  integer,   // multi-level spikes feed matmuls directly (training)
  expanded,  // spikes unrolled into D binary sub-steps, accumulate-only
};

struct ForwardOptions {
  SpikePath path = SpikePath::integer;
  TraceRecorder* recorder = nullptr;
};

struct EncoderOutput {
  SpikeFeature spikes;  // T x H
  Tensor trains;        // T x C, projection of each timestep
  // Largest |expanded - integer| pre-activation seen (expanded path only).
  double expansion_gap = 0.0;
};

EncoderOutput encode(const PointCloud& cloud, const EncoderParams& params,
                     const EncoderConfig& cfg, const ForwardOptions& opts = {});

EncoderOutput spike_pointnet_forward(const PointCloud& cloud, const EncoderParams& params,
                                     const EncoderConfig& cfg, const ForwardOptions& opts = {});
EncoderOutput spike_pointformer_forward(const PointCloud& cloud, const EncoderParams& params,
                                        const EncoderConfig& cfg, const ForwardOptions& opts = {});

// Time-mean of the projected trains: the C-wide embedding F^S / T.
Tensor embedding(const EncoderOutput& out);

// Softmax-free spike-driven attention: SN(SN(Q) SN(K)^T) SN(V), one step from
// rest. Q, K, V are N x d.
Tensor sda(const Tensor& q, const Tensor& k, const Tensor& v, const NeuronConfig& neuron);

// head (K x C) applied to the time-mean of trains (T x C).
Tensor classify_head(const Tensor& trains, const Tensor& head);
Tensor classify_head(const SpikeFeature& f, const Tensor& head);

}  // namespace svl
