#pragma once

#include <cstddef>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/nd/tensor.hpp"

namespace meshssm::losses {

enum class ChamferNorm {
  l1,  // unsquared Euclidean point distances
  l2,  // squared Euclidean point distances
};

// Mean over a of the distance to the nearest point of b, plus the same from b
// to a. a is [n×3], b is [m×3]; differentiable in both. The gradient of each
// nearest-neighbour term goes to a single partner (lowest index on ties).
nd::Tensor two_way_chamfer(const nd::Tensor& a, const nd::Tensor& b, ChamferNorm norm);
double two_way_chamfer(const geometry::PointSet& a, const geometry::PointSet& b, ChamferNorm norm);

// Mean squared coordinate difference between two equally ordered vertex sets.
nd::Tensor vertex_mse(const nd::Tensor& v, const nd::Tensor& v_hat);

struct LossWeights {
  double alpha = 0.01;  // L1 Chamfer
  double gamma = 0.01;  // vertex reconstruction
  void validate() const;
};

struct CorrespondenceLoss {
  nd::Tensor total;
  double chamfer_l2 = 0.0;
  double chamfer_l1 = 0.0;
  double vertex_mse = 0.0;
};

// L2chamfer(v, c) + α·L1chamfer(v, c) + γ·MSE(v, v̂) for one sample.
CorrespondenceLoss correspondence_loss(const nd::Tensor& v, const nd::Tensor& c, const nd::Tensor& v_hat,
                                       const LossWeights& weights);

// Batch form over `samples` stacked samples: v and v_hat are [(B·n)×3], c is
// [(B·m)×3]. The total and every reported term are means over samples.
CorrespondenceLoss correspondence_loss_batch(const nd::Tensor& v, const nd::Tensor& c, const nd::Tensor& v_hat,
                                             std::size_t samples, const LossWeights& weights);

// KL(N(μ, diag σ²) || N(0, I)) = ½ Σ (μ² + σ² − 1 − log σ²). For [B×L] inputs
// each row is one sample and the result is the mean over rows.
nd::Tensor gaussian_kl(const nd::Tensor& mu, const nd::Tensor& log_var);

struct VaeLoss {
  nd::Tensor total;
  double reconstruction = 0.0;
  double kl = 0.0;
};

// MSE(c, ĉ) + β·KL with c, ĉ in the same point order.
VaeLoss spvae_loss(const nd::Tensor& c, const nd::Tensor& c_hat, const nd::Tensor& mu, const nd::Tensor& log_var,
                   double beta = 1.0);

}  // namespace meshssm::losses
