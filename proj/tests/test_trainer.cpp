#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "helpers.hpp"
#include "svl/error.hpp"
#include "svl/trainer.hpp"

using namespace svl;

namespace {

SynthDataset tiny_synth() {
  SynthConfig cfg;
  cfg.n_per_class = 16;
  cfg.dim = 32;
  cfg.points = 64;
  cfg.seed = 3;
  return synth_triplets(cfg);
}

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.dims = {16, 32};
  cfg.embed_dim = 32;
  cfg.timesteps = 1;
  return cfg;
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 12;
  cfg.warmup_epochs = 1;
  cfg.seed = 5;
  return cfg;
}

// Independent scalar Adam with decoupled weight decay.
double adam_reference(double x, const std::vector<double>& grads, double lr, double wd) {
  double m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    x -= lr * (mh / (std::sqrt(vh) + 1e-8) + wd * x);
  }
  return x;
}

}  // namespace

TEST_CASE("adamw_step") {
  ParamMap p{{"w", Tensor({1, 2}, {0.5, -0.25})}, {"b", Tensor({2}, {1.0, 2.0})}};
  AdamState st;
  adamw_step(p, {{"w", {0.0, 0.0}}, {"b", {0.0, 0.0}}}, st, 1e-2, 0.0);
  CHECK(st.step == 1);
  CHECK(p.at("w").values() == std::vector<double>{0.5, -0.25});
  CHECK(p.at("b").values() == std::vector<double>{1.0, 2.0});

  ParamMap q{{"w", Tensor({1, 1}, {0.0})}};
  AdamState qs;
  for (int i = 0; i < 50; ++i) adamw_step(q, {{"w", {3.0}}}, qs, 1e-2, 0.0);
  CHECK(q.at("w")[0] < 0.0);

  // Rank-2 parameter so weight decay applies.
  ParamMap r{{"w", Tensor({1, 1}, {0.8})}};
  AdamState rs;
  const std::vector<double> gs{0.3, -1.2, 0.05};
  for (double g : gs) adamw_step(r, {{"w", {g}}}, rs, 0.1, 0.01);
  CHECK(std::abs(r.at("w")[0] - adam_reference(0.8, gs, 0.1, 0.01)) < 1e-15);

  // Biases are not decayed.
  ParamMap bias{{"b", Tensor({1}, {1.0})}};
  AdamState bs;
  adamw_step(bias, {{"b", {0.0}}}, bs, 0.1, 0.5);
  CHECK(bias.at("b")[0] == 1.0);

  ParamMap n{{"w", Tensor({1, 1}, {0.0})}};
  AdamState ns;
  try {
    adamw_step(n, {{"w", {NAN}}}, ns, 1e-2, 0.0);
    FAIL("expected numeric_error");
  } catch (const Error& e) {
    CHECK(e.kind() == "numeric_error");
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
}

TEST_CASE("clip_global_norm") {
  GradMap g{{"a", {3.0}}, {"b", {4.0}}};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.at("a")[0] == doctest::Approx(0.6));
  CHECK(g.at("b")[0] == doctest::Approx(0.8));
  GradMap small{{"a", {0.1}}};
  clip_global_norm(small, 1.0);
  CHECK(small.at("a")[0] == 0.1);
}

TEST_CASE("lr_at") {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.warmup_epochs = 10;
  cfg.base_lr = 2e-3;
  CHECK(lr_at(0, cfg) == 0.0);
  CHECK(lr_at(10, cfg) == doctest::Approx(2e-3).epsilon(1e-15));
  CHECK(std::abs(lr_at(55, cfg) - 1e-3) < 1e-12);
  CHECK(lr_at(5, cfg) == doctest::Approx(1e-3));
  CHECK(std::abs(lr_at(10 - 1e-9, cfg) - lr_at(10 + 1e-9, cfg)) < 1e-9);
  CHECK(lr_at(100, cfg) < 1e-18);
  cfg.warmup_epochs = 100;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(schedule_from("onecycle") == Schedule::onecycle);
  CHECK_THROWS_AS(schedule_from("step"), Error);
}

TEST_CASE("pretraining with zero loss weights leaves parameters unchanged") {
  const SynthDataset d = tiny_synth();
  LossConfig loss;
  loss.lambda1 = loss.lambda2 = loss.lambda3 = 0.0;
  TrainConfig cfg = tiny_train(3);
  cfg.weight_decay = 0.0;
  const Checkpoint start = new_checkpoint(tiny_encoder(), loss, 1);
  const Checkpoint end = pretrain_loop(d.train, start, loss, cfg);
  CHECK(end.epoch == 3);
  for (const auto& [name, t] : start.params.tensors) CHECK(end.params.at(name).values() == t.values());
  CHECK(end.log_temp == start.log_temp);
}

TEST_CASE("pretraining reduces the loss, is deterministic and resumable") {
  const SynthDataset d = tiny_synth();
  const SynthDataset frozen = tiny_synth();
  LossConfig loss;
  const TrainConfig cfg = tiny_train(10);
  const Checkpoint a = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, cfg);
  REQUIRE(a.history.size() == 10);
  for (std::size_t e = 1; e < 10; ++e) CHECK(a.history[e].total < a.history[e - 1].total);

  const Checkpoint b = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, cfg);
  CHECK(loss_history_csv(a.history) == loss_history_csv(b.history));

  // Stop at epoch 4, save, reload and finish.
  const Checkpoint half =
      pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, cfg, 4);
  const auto dir = svl::testing::temp_dir("resume");
  save_checkpoint(half, dir);
  const Checkpoint rest = pretrain_loop(d.train, load_checkpoint(dir), loss, cfg);
  CHECK(loss_history_csv(rest.history) == loss_history_csv(a.history));
  for (const auto& [name, t] : a.params.tensors) CHECK(rest.params.at(name).values() == t.values());

  // Frozen embeddings are untouched.
  for (std::size_t i = 0; i < d.train.samples.size(); ++i) {
    CHECK(d.train.samples[i].text == frozen.train.samples[i].text);
    CHECK(d.train.samples[i].image == frozen.train.samples[i].image);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const SynthDataset d = tiny_synth();
  LossConfig loss;
  const TrainConfig cfg = tiny_train(2);
  const char* prev = std::getenv("SVL_THREADS");
  const std::string saved = prev ? prev : "";
  setenv("SVL_THREADS", "1", 1);
  const Checkpoint one = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 2), loss, cfg);
  setenv("SVL_THREADS", "3", 1);
  const Checkpoint three = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 2), loss, cfg);
  if (prev)
    setenv("SVL_THREADS", saved.c_str(), 1);
  else
    unsetenv("SVL_THREADS");
  CHECK(loss_history_csv(one.history) == loss_history_csv(three.history));
  for (const auto& [name, t] : one.params.tensors) CHECK(three.params.at(name).values() == t.values());
}

TEST_CASE("fine-tuning") {
  const SynthDataset d = tiny_synth();
  LossConfig loss;
  TrainConfig pre_cfg = tiny_train(60);
  pre_cfg.base_lr = 1e-2;
  const Checkpoint pre = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, pre_cfg);

  SUBCASE("uniform logits give ln K on the first step") {
    TrainConfig cfg = tiny_train(2);
    cfg.batch_size = 1000;
    const Checkpoint ft = finetune_loop(d.train, nullptr, pre, d.classes, cfg);
    CHECK(std::abs(ft.accuracy[0].loss - std::log(3.0)) < 1e-12);
  }

  SUBCASE("frozen encoder with a linear head separates the classes") {
    // The prompt head already separates the training set, so a linear head can.
    const ZeroShotHead prompts = build_head(d.prompts, 1.0, d.classes);
    REQUIRE(evaluate_zeroshot(d.train, pre.params, pre.encoder, prompts).top1() == 1.0);
    TrainConfig cfg = tiny_train(60);
    cfg.freeze_encoder = true;
    cfg.base_lr = 5e-2;
    cfg.weight_decay = 0.0;
    const Checkpoint ft = finetune_loop(d.train, &d.test, pre, d.classes, cfg);
    CHECK(ft.accuracy.back().train_accuracy == 1.0);
    for (const auto& [name, t] : pre.params.tensors) CHECK(ft.params.at(name).values() == t.values());
  }

  SUBCASE("T changes from 1 to 6 between pretraining and fine-tuning") {
    TrainConfig cfg = tiny_train(2);
    cfg.timesteps = 6;
    const Checkpoint ft = finetune_loop(d.train, &d.test, pre, d.classes, cfg);
    CHECK(ft.encoder.timesteps == 6);
    CHECK(ft.accuracy.size() == 2);
    CHECK(ft.accuracy.back().test_accuracy.has_value());
    CHECK(ft.head->weights.shape() == Shape{3, 32});
  }

  SUBCASE("labels outside the class set") {
    try {
      finetune_loop(d.train, nullptr, pre, {"sphere", "cube"}, tiny_train(2));
      FAIL("expected out_of_range");
    } catch (const Error& e) {
      CHECK(e.kind() == "out_of_range");
    }
  }
}

TEST_CASE("checkpoint round trip") {
  const SynthDataset d = tiny_synth();
  LossConfig loss;
  Checkpoint ck = pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, tiny_train(2));
  ck = finetune_loop(d.train, &d.test, ck, d.classes, tiny_train(2));
  const auto dir = svl::testing::temp_dir("ckpt");
  save_checkpoint(ck, dir);
  const Checkpoint back = load_checkpoint(dir);
  CHECK(back.epoch == ck.epoch);
  CHECK(back.log_temp == ck.log_temp);
  CHECK(back.opt.step == ck.opt.step);
  CHECK(back.encoder.dims == ck.encoder.dims);
  for (const auto& [name, t] : ck.params.tensors) CHECK(back.params.at(name).values() == t.values());
  for (const auto& [name, m] : ck.opt.m) CHECK(back.opt.m.at(name) == m);
  REQUIRE(back.head.has_value());
  CHECK(back.head->labels == ck.head->labels);
  CHECK(back.head->weights.values() == ck.head->weights.values());
  CHECK(loss_history_csv(back.history) == loss_history_csv(ck.history));
  CHECK(accuracy_csv(back.accuracy) == accuracy_csv(ck.accuracy));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
}

TEST_CASE("zero-shot report") {
  const SynthDataset d = tiny_synth();
  LossConfig loss;
  const Checkpoint ck =
      pretrain_loop(d.train, new_checkpoint(tiny_encoder(), loss, 1), loss, tiny_train(2));
  const ZeroShotHead head = build_head(d.prompts, std::exp(ck.log_temp), d.classes);
  const ZeroShotReport r = evaluate_zeroshot(d.test, ck.params, ck.encoder, head);
  CHECK(r.total == d.test.samples.size());
  std::size_t sum = 0;
  for (std::size_t n : r.class_total) sum += n;
  CHECK(sum == r.total);
  CHECK(zeroshot_json(r).find("\"top1\"") != std::string::npos);
  const ZeroShotHead narrow = build_head(Tensor::full({3, 8}, 1.0), 1.0, d.classes);
  try {
    evaluate_zeroshot(d.test, ck.params, ck.encoder, narrow);
    FAIL("expected dim_mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == "dim_mismatch");
  }
}
