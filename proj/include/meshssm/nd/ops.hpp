#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "meshssm/nd/tensor.hpp"

namespace meshssm::nd {

// a[n×k] · b[k×m]
Tensor matmul(const Tensor& a, const Tensor& b);
// x[n×in] · w[in×out] + bias[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
// max(x, slope·x); the subgradient at 0 is slope.
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
// Gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
// Row i of the input becomes rows [i·times, (i+1)·times).
Tensor repeat_rows(const Tensor& a, std::size_t times);
// The whole input stacked `times` times.
Tensor tile_rows(const Tensor& a, std::size_t times);

// x has groups·group_size rows; returns groups × d. Max routes the gradient to
// the arg-max row, lowest row on ties.
Tensor segment_max(const Tensor& x, std::size_t group_size);
Tensor segment_mean(const Tensor& x, std::size_t group_size);
// Whole-set pooling of x[n×d] to a length-d vector.
Tensor reduce_max_over_set(const Tensor& x);
Tensor reduce_mean_over_set(const Tensor& x);

enum class Mode { train, eval };

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm(std::size_t features = 1);
  std::size_t features() const { return running_mean.size(); }
};

// Per-column normalization of x[n×d]. Train mode uses batch statistics
// (n ≥ 2) and updates the running estimates; eval mode uses the running ones.
Tensor batch_norm(const Tensor& x, BatchNorm& bn, Mode mode);

// Linear part of an EdgeConv layer. For point i with neighbors
// neighbors[i·k .. i·k+k), output row i·k+r is
//   concat(x_i, x_j − x_i) · w + bias,  j = neighbors[i·k + r],
// with w of shape [2d × out]. Computed via per-point projections, so the cost
// is two n×d×out products instead of one (n·k)×2d×out product.
Tensor edge_linear(const Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k,
                   const Tensor& w, const Tensor& bias);

// Whole EdgeConv block as one op:
//   segment_max(leaky_relu(batch_norm(edge_linear(x, ...), bn, mode), slope), k)
// with identical values and gradients. Edge rows are recomputed from the
// per-point projections instead of being stored, so memory stays O(n·out)
// rather than O(n·k·out).
Tensor edge_conv(const Tensor& x, std::span<const std::uint32_t> neighbors, std::size_t k, const Tensor& w,
                 const Tensor& bias, BatchNorm& bn, Mode mode, double slope = 0.2);

}  // namespace meshssm::nd
