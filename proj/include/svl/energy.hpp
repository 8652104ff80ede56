#pragma once

// Analytical inference energy for spike-driven networks.
//
//   E = e_mac * (FLOPs of MAC layers) + e_ac * T * sum(FLOPs * firing_rate)
//
// MAC layers are the analog coding layer and the zero-shot head; every layer
// that consumes spikes only accumulates weights.

#include <optional>
#include <string>
#include <vector>

#include "svl/autodiff.hpp"
#include "svl/neuron.hpp"

namespace svl {

enum class LayerKind { encode_mac, spike_ac, head_mac };

const char* to_string(LayerKind kind);

struct LayerTrace {
  std::string name;
  LayerKind kind = LayerKind::spike_ac;
  double flops = 0.0;                // dense multiply-accumulate count
  std::optional<double> firing_rate;  // spike_ac layers only
};

struct EnergyModel {
  static constexpr double kMacPicojoules = 4.6;
  static constexpr double kAcPicojoules = 0.9;

  double e_mac_pj = kMacPicojoules;
  double e_ac_pj = kAcPicojoules;
  double timesteps = 1.0;
};

struct LayerEnergy {
  LayerTrace trace;
  double picojoules = 0.0;
};

struct EnergyReport {
  std::vector<LayerEnergy> layers;
  double mac_pj = 0.0;
  double ac_pj = 0.0;
  double total_pj = 0.0;

  double total_joules() const { return total_pj * 1e-12; }
};

// Active binary slots after virtual expansion: sum(s) / (count * d_max).
double firing_rate(const Tensor& spikes, int d_max);
double firing_rate(const SpikeFeature& f);

// Throws invalid_trace when a spike layer lacks a firing rate or a MAC layer
// carries one.
EnergyReport estimate(const std::vector<LayerTrace>& traces, const EnergyModel& model);

std::string energy_table(const EnergyReport& report);
std::string energy_json(const EnergyReport& report, const EnergyModel& model);

// Collects traces during a forward pass. Repeated records under one name (one
// per timestep) are merged: FLOPs are kept, firing rates averaged.
class TraceRecorder {
 public:
  void record(const std::string& name, LayerKind kind, double flops,
              std::optional<double> firing_rate = std::nullopt);
  std::vector<LayerTrace> traces() const;

 private:
  struct Entry {
    LayerTrace trace;
    double fr_sum = 0.0;
    std::size_t calls = 0;
  };
  std::vector<Entry> entries_;
};

}  // namespace svl
