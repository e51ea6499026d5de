#include "meshssm/losses/losses.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::losses {

using nd::Tensor;
using nd::detail::Node;

namespace {

void require_points(const Tensor& t, const char* what) {
  if (t.dim() != 2 || t.cols() != 3)
    throw DimensionError(std::string(what) + ": expected an [n x 3] point tensor, got " + nd::shape_string(t.shape()));
}

Tensor points_tensor(const geometry::PointSet& p) {
  if (p.size() == 0) throw ValidationError("two_way_chamfer: empty point set");
  return Tensor::from({p.size(), 3}, p.flat());
}

}  // namespace

Tensor two_way_chamfer(const Tensor& a, const Tensor& b, ChamferNorm norm) {
  require_points(a, "two_way_chamfer");
  require_points(b, "two_way_chamfer");
  const std::size_t n = a.rows(), m = b.rows();
  std::vector<double> d(n * m);
  nd::kernels::active().pairwise_sqdist(a.data().data(), n, b.data().data(), m, 3, d.data());

  std::vector<std::uint32_t> a_to_b(n), b_to_a(m, 0);
  std::vector<double> col_best(m, std::numeric_limits<double>::infinity());
  const bool squared = norm == ChamferNorm::l2;
  auto point_cost = [squared](double sq) { return squared ? sq : std::sqrt(sq); };

  double sum_ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = d.data() + i * m;
    std::size_t best = 0;
    for (std::size_t j = 1; j < m; ++j)
      if (row[j] < row[best]) best = j;
    a_to_b[i] = static_cast<std::uint32_t>(best);
    sum_ab += point_cost(row[best]);
    for (std::size_t j = 0; j < m; ++j)
      if (row[j] < col_best[j]) {
        col_best[j] = row[j];
        b_to_a[j] = static_cast<std::uint32_t>(i);
      }
  }
  double sum_ba = 0.0;
  for (std::size_t j = 0; j < m; ++j) sum_ba += point_cost(col_best[j]);
  const double value = sum_ab / static_cast<double>(n) + sum_ba / static_cast<double>(m);

  return nd::detail::make_op(
      squared ? "chamfer_l2" : "chamfer_l1", {1}, {value}, {a, b},
      [n, m, squared, a_to_b = std::move(a_to_b), b_to_a = std::move(b_to_a)](Node& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        double* ga = Node::grad_of(self.parents[0]);
        double* gb = Node::grad_of(self.parents[1]);
        const double up = self.grad[0];
        // Adds the gradient of cost(|p − q|) with weight w: +∂/∂p to p, −∂/∂p to q.
        auto pair = [&](std::size_t i, std::size_t j, double w) {
          double diff[3];
          double sq = 0.0;
          for (int c = 0; c < 3; ++c) {
            diff[c] = av[3 * i + c] - bv[3 * j + c];
            sq += diff[c] * diff[c];
          }
          double coeff;
          if (squared) {
            coeff = 2.0 * w;
          } else {
            if (sq == 0.0) return;
            coeff = w / std::sqrt(sq);
          }
          for (int c = 0; c < 3; ++c) {
            if (ga) ga[3 * i + c] += coeff * diff[c];
            if (gb) gb[3 * j + c] -= coeff * diff[c];
          }
        };
        for (std::size_t i = 0; i < n; ++i) pair(i, a_to_b[i], up / static_cast<double>(n));
        for (std::size_t j = 0; j < m; ++j) pair(b_to_a[j], j, up / static_cast<double>(m));
      });
}

double two_way_chamfer(const geometry::PointSet& a, const geometry::PointSet& b, ChamferNorm norm) {
  nd::NoGradGuard no_grad;
  return two_way_chamfer(points_tensor(a), points_tensor(b), norm).item();
}

Tensor vertex_mse(const Tensor& v, const Tensor& v_hat) {
  if (v.shape() != v_hat.shape())
    throw DimensionError("vertex_mse: shape mismatch " + nd::shape_string(v.shape()) + " vs " +
                         nd::shape_string(v_hat.shape()));
  return nd::mse(v, v_hat);
}

void LossWeights::validate() const {
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw ValidationError("loss weight alpha must be finite and >= 0");
  if (!(std::isfinite(gamma) && gamma >= 0.0)) throw ValidationError("loss weight gamma must be finite and >= 0");
}

CorrespondenceLoss correspondence_loss(const Tensor& v, const Tensor& c, const Tensor& v_hat,
                                       const LossWeights& weights) {
  weights.validate();
  const Tensor l2 = two_way_chamfer(v, c, ChamferNorm::l2);
  const Tensor l1 = two_way_chamfer(v, c, ChamferNorm::l1);
  const Tensor rec = vertex_mse(v, v_hat);
  CorrespondenceLoss out;
  out.total = nd::add(nd::add(l2, nd::scale(l1, weights.alpha)), nd::scale(rec, weights.gamma));
  out.chamfer_l2 = l2.item();
  out.chamfer_l1 = l1.item();
  out.vertex_mse = rec.item();
  return out;
}

CorrespondenceLoss correspondence_loss_batch(const Tensor& v, const Tensor& c, const Tensor& v_hat,
                                             std::size_t samples, const LossWeights& weights) {
  if (samples == 0 || v.rows() % samples != 0 || c.rows() % samples != 0 || v_hat.shape() != v.shape())
    throw DimensionError("correspondence_loss_batch: inputs do not split into " + std::to_string(samples) +
                         " samples");
  const std::size_t n = v.rows() / samples, m = c.rows() / samples;
  const double inv = 1.0 / static_cast<double>(samples);
  CorrespondenceLoss out;
  std::vector<Tensor> totals;
  for (std::size_t s = 0; s < samples; ++s) {
    auto one = correspondence_loss(nd::slice_rows(v, s * n, n), nd::slice_rows(c, s * m, m),
                                   nd::slice_rows(v_hat, s * n, n), weights);
    totals.push_back(one.total);
    out.chamfer_l2 += inv * one.chamfer_l2;
    out.chamfer_l1 += inv * one.chamfer_l1;
    out.vertex_mse += inv * one.vertex_mse;
  }
  out.total = nd::mean(nd::concat_rows([&] {
    std::vector<Tensor> rows;
    for (auto& t : totals) rows.push_back(nd::reshape(t, {1, 1}));
    return rows;
  }()));
  return out;
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& log_var) {
  if (mu.shape() != log_var.shape())
    throw DimensionError("gaussian_kl: shape mismatch " + nd::shape_string(mu.shape()) + " vs " +
                         nd::shape_string(log_var.shape()));
  const double samples = mu.dim() >= 2 ? static_cast<double>(mu.rows()) : 1.0;
  // ½ Σ (μ² + exp(lv) − 1 − lv), averaged over samples.
  const Tensor terms = nd::sub(nd::add(nd::square(mu), nd::exp(log_var)), nd::add_scalar(log_var, 1.0));
  return nd::scale(nd::sum(terms), 0.5 / samples);
}

VaeLoss spvae_loss(const Tensor& c, const Tensor& c_hat, const Tensor& mu, const Tensor& log_var, double beta) {
  if (c.shape() != c_hat.shape())
    throw DimensionError("spvae_loss: reconstruction shape " + nd::shape_string(c_hat.shape()) +
                         " does not match input " + nd::shape_string(c.shape()));
  if (!(beta >= 0.0)) throw ValidationError("spvae_loss: beta must be non-negative");
  const Tensor rec = nd::mse(c, c_hat);
  const Tensor kl = gaussian_kl(mu, log_var);
  VaeLoss out;
  out.total = nd::add(rec, nd::scale(kl, beta));
  out.reconstruction = rec.item();
  out.kl = kl.item();
  return out;
}

}  // namespace meshssm::losses
