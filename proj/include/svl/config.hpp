#pragma once

// Strict JSON run configuration. Unknown keys are rejected so typos surface
// as errors instead of silently falling back to defaults.
//
// {
//   "seed": 7,
//   "encoder": {"variant": "pointnet", "dims": [64, 128], "embed_dim": 512, ...},
//   "neuron": {"beta": 0.5, "theta": 1.0, "a": 1.0, "mode": "integer"},
//   "loss": {"lambda": [1, 1, 1], "init_log_temp": 2.659, ...},
//   "train": {"epochs": 100, "timesteps": 1, "d_max": 4, ...},
//   "data": {"train": "train.jsonl", "test": "test.jsonl",
//            "labels": "labels.json"},
//   "output": "run"
// }
//
// Relative paths resolve against the config file's directory. T and D live in
// "train" because they may change between pretraining and fine-tuning.

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "svl/alignment.hpp"
#include "svl/encoder.hpp"
#include "svl/trainer.hpp"

namespace svl {

struct DataPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> labels;
};

struct RunConfig {
  std::uint64_t seed = 0;
  EncoderConfig encoder;
  LossConfig loss;
  TrainConfig train;
  DataPaths data;
  std::filesystem::path output;
};

// Throws config_error for unknown keys, wrong types, a missing seed or
// missing output, and io_error when the file cannot be read.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json encoder_to_json(const EncoderConfig& cfg);
// Strict inverse of encoder_to_json, including the neuron block.
EncoderConfig encoder_from_json(const nlohmann::json& j);

std::vector<std::string> load_labels(const std::filesystem::path& path);

}  // namespace svl
