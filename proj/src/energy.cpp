#include "svl/energy.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "svl/error.hpp"

namespace svl {

namespace {
constexpr const char* kInvalidTrace = "invalid_trace";
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::encode_mac:
      return "encode_mac";
    case LayerKind::spike_ac:
      return "spike_ac";
    case LayerKind::head_mac:
      return "head_mac";
  }
  return "unknown";
}

double firing_rate(const Tensor& spikes, int d_max) {
  if (d_max < 1) throw Error(err::kConfig, "firing_rate needs d_max >= 1");
  double total = 0.0;
  for (double v : spikes.data()) {
    if (v < 0.0) throw Error(err::kDegenerate, "firing_rate needs non-negative spike counts");
    total += v;
  }
  return total / (static_cast<double>(spikes.size()) * d_max);
}

double firing_rate(const SpikeFeature& f) { return firing_rate(f.values(), f.d_max()); }

EnergyReport estimate(const std::vector<LayerTrace>& traces, const EnergyModel& model) {
  if (!(model.e_mac_pj > 0.0 && model.e_ac_pj > 0.0))
    throw Error(err::kConfig, "energy costs must be positive");
  if (model.timesteps < 0.0) throw Error(err::kConfig, "energy timesteps must be non-negative");
  EnergyReport report;
  for (const LayerTrace& tr : traces) {
    if (tr.flops < 0.0) throw Error(kInvalidTrace, "layer " + tr.name + " has negative FLOPs");
    LayerEnergy le{tr, 0.0};
    if (tr.kind == LayerKind::spike_ac) {
      if (!tr.firing_rate)
        throw Error(kInvalidTrace, "spike layer " + tr.name + " has no firing rate");
      const double fr = *tr.firing_rate;
      if (fr < 0.0 || fr > 1.0)
        throw Error(kInvalidTrace, "firing rate of " + tr.name + " outside [0, 1]");
      le.picojoules = model.e_ac_pj * model.timesteps * tr.flops * fr;
      report.ac_pj += le.picojoules;
    } else {
      if (tr.firing_rate)
        throw Error(kInvalidTrace, "MAC layer " + tr.name + " must not carry a firing rate");
      le.picojoules = model.e_mac_pj * tr.flops;
      report.mac_pj += le.picojoules;
    }
    report.layers.push_back(std::move(le));
  }
  report.total_pj = report.mac_pj + report.ac_pj;
  return report;
}

std::string energy_table(const EnergyReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %-11s %14s %8s %14s\n", "layer", "kind", "FLOPs", "fr",
                "pJ");
  os << line;
  for (const LayerEnergy& le : report.layers) {
    const std::string fr =
        le.trace.firing_rate ? std::to_string(*le.trace.firing_rate).substr(0, 6) : "-";
    std::snprintf(line, sizeof line, "%-24s %-11s %14.0f %8s %14.3f\n", le.trace.name.c_str(),
                  to_string(le.trace.kind), le.trace.flops, fr.c_str(), le.picojoules);
    os << line;
  }
  std::snprintf(line, sizeof line, "total: %.3f pJ (%.6g mJ)\n", report.total_pj,
                report.total_pj * 1e-9);
  os << line;
  return os.str();
}

std::string energy_json(const EnergyReport& report, const EnergyModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerEnergy& le : report.layers) {
    nlohmann::json j{{"layer", le.trace.name},
                     {"kind", to_string(le.trace.kind)},
                     {"flops", le.trace.flops},
                     {"pj", le.picojoules}};
    j["fr"] = le.trace.firing_rate ? nlohmann::json(*le.trace.firing_rate) : nlohmann::json(nullptr);
    layers.push_back(std::move(j));
  }
  nlohmann::json out{{"e_mac_pj", model.e_mac_pj}, {"e_ac_pj", model.e_ac_pj},
                     {"timesteps", model.timesteps}, {"layers", layers},
                     {"mac_pj", report.mac_pj},     {"ac_pj", report.ac_pj},
                     {"total_pj", report.total_pj}, {"total_joules", report.total_joules()}};
  return out.dump(2);
}

void TraceRecorder::record(const std::string& name, LayerKind kind, double flops,
                           std::optional<double> firing_rate) {
  for (Entry& e : entries_) {
    if (e.trace.name != name) continue;
    if (firing_rate) e.fr_sum += *firing_rate;
    ++e.calls;
    return;
  }
  Entry e;
  e.trace = LayerTrace{name, kind, flops, std::nullopt};
  e.fr_sum = firing_rate.value_or(0.0);
  e.calls = 1;
  if (firing_rate) e.trace.firing_rate = 0.0;
  entries_.push_back(std::move(e));
}

std::vector<LayerTrace> TraceRecorder::traces() const {
  std::vector<LayerTrace> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) {
    LayerTrace t = e.trace;
    if (t.firing_rate) t.firing_rate = e.fr_sum / static_cast<double>(e.calls);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace svl
