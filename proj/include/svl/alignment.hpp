#pragma once

// Triple-modality alignment losses: spike-text and spike-image InfoNCE plus a
// fine-grained spike-image MSE term.

#include "svl/autodiff.hpp"

namespace svl {

struct AlignmentBatch {
  Tensor spike;  // B x C, time-mean spike embeddings
  Tensor text;   // B x C, frozen
  Tensor image;  // B x C, frozen

  void validate() const;
};

struct LossConfig {
  double lambda1 = 1.0;  // spike-text InfoNCE
  double lambda2 = 1.0;  // spike-image InfoNCE
  double lambda3 = 1.0;  // spike-image MSE
  double init_log_temp = 2.6592600369327779;  // ln(1 / 0.07)
  // Bounds on the similarity scale e^rho.
  double scale_min = 0.36787944117144233;  // e^-1
  double scale_max = 100.0;

  void validate() const;
  double clamp_log_temp(double rho) const;
};

// Symmetric InfoNCE over row-normalized x and y with similarity scale `scale`
// (a rank-0 tensor so the temperature can be learned).
Tensor infonce(const Tensor& x, const Tensor& y, const Tensor& scale);
Tensor infonce(const Tensor& x, const Tensor& y, double scale);

// Sum over the batch of squared distances between L2-normalized rows.
Tensor mse_align(const Tensor& fs, const Tensor& fi);

struct MtaLoss {
  Tensor total;
  Tensor nce_text;
  Tensor nce_image;
  Tensor mse;
};

// log_temp is the learnable rho; the similarity scale is e^rho.
MtaLoss mta_total(const AlignmentBatch& batch, const LossConfig& cfg, const Tensor& log_temp);

}  // namespace svl
