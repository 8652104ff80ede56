#include "svl/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "svl/error.hpp"

namespace svl {

void AlignmentBatch::validate() const {
  if (spike.rank() != 2 || text.shape() != spike.shape() || image.shape() != spike.shape())
    throw Error(err::kShape, "alignment batch needs matching B x C tensors, got " +
                                 shape_str(spike.shape()) + ", " + shape_str(text.shape()) +
                                 ", " + shape_str(image.shape()));
}

void LossConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw Error(err::kConfig, "loss weights must be non-negative");
  if (!(scale_min > 0.0 && scale_min <= scale_max))
    throw Error(err::kConfig, "temperature clamp bounds are invalid");
  const double s = std::exp(init_log_temp);
  if (s < scale_min || s > scale_max)
    throw Error(err::kConfig, "initial temperature lies outside the clamp bounds");
}

double LossConfig::clamp_log_temp(double rho) const {
  return std::clamp(rho, std::log(scale_min), std::log(scale_max));
}

namespace {

Tensor eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

}  // namespace

Tensor infonce(const Tensor& x, const Tensor& y, const Tensor& sim_scale) {
  if (x.rank() != 2 || x.shape() != y.shape())
    throw Error(err::kShape, "infonce needs two B x C tensors, got " + shape_str(x.shape()) +
                                 " and " + shape_str(y.shape()));
  if (sim_scale.rank() != 0) throw Error(err::kShape, "infonce scale must be a scalar");
  const std::size_t b = x.dim(0);
  Tensor sim = mul(matmul(normalize_l2(x, 1), transpose(normalize_l2(y, 1))), sim_scale);
  const Tensor diag = eye(b);
  // Row softmax: x_i against every y_j. Column softmax: y_i against every x_j.
  Tensor matched = add(sum_all(mul(log_softmax(sim, 1), diag)),
                       sum_all(mul(log_softmax(sim, 0), diag)));
  return scale(matched, -1.0 / (2.0 * static_cast<double>(b)));
}

Tensor infonce(const Tensor& x, const Tensor& y, double sim_scale) {
  return infonce(x, y, Tensor::scalar(sim_scale));
}

Tensor mse_align(const Tensor& fs, const Tensor& fi) {
  if (fs.rank() != 2 || fs.shape() != fi.shape())
    throw Error(err::kShape, "mse_align needs two B x C tensors, got " + shape_str(fs.shape()) +
                                 " and " + shape_str(fi.shape()));
  return sum_all(square(sub(normalize_l2(fs, 1), normalize_l2(fi, 1))));
}

MtaLoss mta_total(const AlignmentBatch& batch, const LossConfig& cfg, const Tensor& log_temp) {
  batch.validate();
  Tensor s = exp(log_temp);
  MtaLoss out{Tensor::scalar(0.0), infonce(batch.spike, batch.text, s),
              infonce(batch.spike, batch.image, s), mse_align(batch.spike, batch.image)};
  out.total = add(add(scale(out.nce_text, cfg.lambda1), scale(out.nce_image, cfg.lambda2)),
                  scale(out.mse, cfg.lambda3));
  return out;
}

}  // namespace svl
