#pragma once

// Re-parameterized zero-shot head. Class prompt embeddings are normalized and
// scaled once, then stored as a K x C linear layer; inference needs no text
// encoder, only this matrix.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svl/autodiff.hpp"
#include "svl/neuron.hpp"

namespace svl {

class ZeroShotHead {
 public:
  // Throws shape_mismatch unless weights is K x C with K == labels.size().
  ZeroShotHead(Tensor weights, double scale, std::vector<std::string> labels);

  const Tensor& weights() const { return weights_; }
  double scale() const { return scale_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t classes() const { return weights_.dim(0); }
  std::size_t width() const { return weights_.dim(1); }

 private:
  Tensor weights_;
  double scale_;
  std::vector<std::string> labels_;
};

// Row i = scale * normalize(text_embeddings[i]). Empty labels become
// "class_<i>".
ZeroShotHead build_head(const Tensor& text_embeddings, double scale,
                        std::vector<std::string> labels = {});

// softmax(W * normalize(mean_t(f))). f is T x C.
Tensor zeroshot_logits(const Tensor& f, const ZeroShotHead& head);
Tensor zeroshot_logits(const SpikeFeature& f, const ZeroShotHead& head);

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  std::size_t argmax_full = 0;
  std::size_t argmax_folded = 0;
  std::vector<double> full;
  std::vector<double> folded;
};

// Compares the folded head against cosine similarity with the raw prompt
// embeddings computed from scratch.
EquivalenceReport verify_equivalence(const Tensor& f, const Tensor& text_embeddings, double scale);

std::size_t argmax(std::span<const double> v);

// head.svlt + head.labels.json (ordered label array) in dir. The scale is
// folded into the weights, so loading recovers it as the first row's norm.
void save_head(const ZeroShotHead& head, const std::filesystem::path& dir);
ZeroShotHead load_head(const std::filesystem::path& dir);

}  // namespace svl
