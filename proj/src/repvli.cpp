#include "svl/repvli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "svl/data.hpp"
#include "svl/error.hpp"

namespace svl {

ZeroShotHead::ZeroShotHead(Tensor weights, double scale, std::vector<std::string> labels)
    : weights_(std::move(weights)), scale_(scale), labels_(std::move(labels)) {
  if (weights_.rank() != 2 || weights_.dim(0) != labels_.size())
    throw Error(err::kShape, "head weights " + shape_str(weights_.shape()) + " do not match " +
                                 std::to_string(labels_.size()) + " labels");
  if (!(scale_ > 0.0)) throw Error(err::kConfig, "head scale must be positive");
}

ZeroShotHead build_head(const Tensor& text_embeddings, double scale,
                        std::vector<std::string> labels) {
  if (text_embeddings.rank() != 2)
    throw Error(err::kShape, "prompt embeddings must be K x C, got " +
                                 shape_str(text_embeddings.shape()));
  const std::size_t k = text_embeddings.dim(0);
  if (labels.empty())
    for (std::size_t i = 0; i < k; ++i) labels.push_back("class_" + std::to_string(i));
  return ZeroShotHead(svl::scale(normalize_l2(text_embeddings.detach(), 1), scale), scale,
                      std::move(labels));
}

Tensor zeroshot_logits(const Tensor& f, const ZeroShotHead& head) {
  if (f.rank() != 2) throw Error(err::kShape, "feature must be T x C, got " + shape_str(f.shape()));
  if (f.dim(1) != head.width())
    throw Error(err::kDim, "feature width " + std::to_string(f.dim(1)) + " does not match head width " +
                               std::to_string(head.width()));
  const Tensor feature = normalize_l2(mean(f, 0), 0);
  return softmax(reshape(matmul(head.weights(), reshape(feature, {head.width(), 1})), {head.classes()}),
                 0);
}

Tensor zeroshot_logits(const SpikeFeature& f, const ZeroShotHead& head) {
  return zeroshot_logits(f.values(), head);
}

namespace {

std::vector<double> unit_row(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double n = std::sqrt(ss);
  if (n < 1e-12) throw Error(err::kDegenerate, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

}  // namespace

EquivalenceReport verify_equivalence(const Tensor& f, const Tensor& text_embeddings, double scale) {
  EquivalenceReport r;
  r.folded = zeroshot_logits(f, build_head(text_embeddings, scale)).values();

  const std::size_t t = f.dim(0), c = f.dim(1), k = text_embeddings.dim(0);
  std::vector<double> avg(c, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < c; ++j) avg[j] += f[i * c + j];
  const auto feat = unit_row(avg);
  std::vector<double> sims(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto p = unit_row(text_embeddings.data().subspan(i * c, c));
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += feat[j] * p[j];
    sims[i] = scale * dot;
  }
  const double top = *std::max_element(sims.begin(), sims.end());
  double z = 0.0;
  for (double& s : sims) z += (s = std::exp(s - top));
  for (double& s : sims) s /= z;
  r.full = std::move(sims);

  for (std::size_t i = 0; i < k; ++i)
    r.max_abs_diff = std::max(r.max_abs_diff, std::abs(r.full[i] - r.folded[i]));
  r.argmax_full = argmax(r.full);
  r.argmax_folded = argmax(r.folded);
  return r;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void save_head(const ZeroShotHead& head, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_tensor(dir / "head.svlt", head.weights());
  std::ofstream out(dir / "head.labels.json", std::ios::trunc);
  if (!out) throw Error(err::kIo, "cannot write " + (dir / "head.labels.json").string());
  out << nlohmann::json(head.labels()).dump(2) << '\n';
}

ZeroShotHead load_head(const std::filesystem::path& dir) {
  Tensor w = load_tensor(dir / "head.svlt");
  std::ifstream in(dir / "head.labels.json");
  if (!in) throw Error(err::kIo, "cannot open " + (dir / "head.labels.json").string());
  std::vector<std::string> labels;
  try {
    labels = nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(err::kParse, "head.labels.json: " + std::string(e.what()));
  }
  if (w.rank() != 2) throw Error(err::kShape, "head.svlt must be K x C");
  double ss = 0.0;
  for (std::size_t j = 0; j < w.dim(1); ++j) ss += w[j] * w[j];
  return ZeroShotHead(std::move(w), std::sqrt(ss), std::move(labels));
}

}  // namespace svl
