#pragma once

// AdamW, the warmup + cosine schedule, and the pretraining and fine-tuning
// loops.
//
// A training step is data-parallel over samples. Each sample runs its own tape
// up to its embedding; the batch loss is differentiated once with respect to
// the stacked embeddings; each sample tape then backpropagates its slice. The
// per-sample gradients are summed in sample order, so results do not depend
// on the worker count.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svl/alignment.hpp"
#include "svl/data.hpp"
#include "svl/encoder.hpp"
#include "svl/repvli.hpp"

namespace svl {

enum class Schedule { cosine, onecycle };

const char* to_string(Schedule s);
Schedule schedule_from(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double base_lr = 2e-3;
  double weight_decay = 1e-4;
  double warmup_epochs = 10.0;
  Schedule schedule = Schedule::cosine;  // onecycle runs the same curve
  std::uint64_t seed = 0;
  std::size_t timesteps = 1;  // T for this run
  int d_max = 4;              // D for this run
  double clip_norm = 5.0;
  bool freeze_encoder = false;  // fine-tuning: train the head only

  void validate() const;
};

// Linear warmup from 0 to base_lr, then cosine decay to 0 at cfg.epochs.
// epoch may be fractional.
double lr_at(double epoch, const TrainConfig& cfg);

using GradMap = std::map<std::string, std::vector<double>>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  GradMap m;
  GradMap v;
};

// Decoupled weight decay is applied to rank-2 tensors only; biases and the
// log temperature are not decayed. A missing gradient counts as zero. Throws
// numeric_error naming the parameter when a gradient is not finite.
void adamw_step(ParamMap& params, const GradMap& grads, AdamState& state, double lr,
                double weight_decay, const AdamConfig& adam = {});

// Rescales grads in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(GradMap& grads, double max_norm);

struct EpochLoss {
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double nce_text = 0.0;
  double nce_image = 0.0;
  double mse = 0.0;
};

struct EpochAccuracy {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

// Linear classification head trained during fine-tuning.
struct ClassHead {
  Tensor weights;  // K x C
  std::vector<std::string> labels;
};

struct Checkpoint {
  EncoderConfig encoder;
  EncoderParams params;
  double log_temp = 0.0;
  std::size_t epoch = 0;  // completed epochs of the current loop
  AdamState opt;
  std::vector<EpochLoss> history;
  std::vector<EpochAccuracy> accuracy;
  std::optional<ClassHead> head;
};

Checkpoint new_checkpoint(const EncoderConfig& encoder, const LossConfig& loss, std::uint64_t seed);

// Runs epochs ck.epoch .. min(until, cfg.epochs) - 1 and returns the updated
// checkpoint. Passing a checkpoint saved mid-run resumes it exactly.
Checkpoint pretrain_loop(const Dataset& data, Checkpoint ck, const LossConfig& loss,
                         const TrainConfig& cfg,
                         std::size_t until = std::numeric_limits<std::size_t>::max());

// Cross-entropy over classify_head logits. Starts a fresh optimizer and head
// (unless ck already holds a head with the same labels and ck.epoch > 0, which
// resumes). cfg.timesteps and cfg.d_max replace the pretraining values. Throws
// out_of_range for a label outside `classes`.
Checkpoint finetune_loop(const Dataset& train, const Dataset* test, Checkpoint ck,
                         const std::vector<std::string>& classes, const TrainConfig& cfg,
                         std::size_t until = std::numeric_limits<std::size_t>::max());

// Fraction of samples whose classify_head argmax matches the label.
double classification_accuracy(const Dataset& data, const Checkpoint& ck);

struct ZeroShotReport {
  std::vector<std::string> labels;
  std::vector<std::size_t> class_total;
  std::vector<std::size_t> class_correct;
  std::vector<std::string> ids;
  std::vector<std::size_t> predictions;
  std::size_t total = 0;
  std::size_t correct = 0;

  double top1() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

// Every sample must carry a label known to the head.
ZeroShotReport evaluate_zeroshot(const Dataset& data, const EncoderParams& params,
                                 const EncoderConfig& encoder, const ZeroShotHead& head);

std::string zeroshot_json(const ZeroShotReport& r);
std::string zeroshot_table(const ZeroShotReport& r);

// Layout: params/<name>.svlt, opt/<name>.m.svlt and .v.svlt, manifest.json
// (encoder config), train_state.json (epoch, rho, optimizer step, histories),
// classifier.svlt + classifier.labels.json when a head is present.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string loss_history_csv(const std::vector<EpochLoss>& history);
std::string accuracy_csv(const std::vector<EpochAccuracy>& curve);

}  // namespace svl
