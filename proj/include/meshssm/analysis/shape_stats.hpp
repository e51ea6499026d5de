#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/nn/spvae.hpp"
#include "meshssm/train/pipeline.hpp"

namespace meshssm::analysis {

// Linear point distribution model over flattened correspondence sets
// (x0 y0 z0 x1 ...). Columns of `modes` are orthonormal, `variances`
// descending; modes with numerically zero variance are dropped.
struct PCAModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd modes;
  Eigen::VectorXd variances;

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t rank() const { return static_cast<std::size_t>(variances.size()); }
  std::size_t point_count() const { return dimension() / 3; }
};

Eigen::VectorXd flatten(const geometry::PointSet& shape);
geometry::PointSet unflatten(const Eigen::VectorXd& flat);

// Sample covariance (divisor N − 1) eigenpairs, computed from the SVD of the
// centered data matrix. Each mode is signed so its largest-magnitude entry is
// positive (first such entry on ties).
PCAModel fit_pca(std::span<const geometry::PointSet> shapes);

// Coefficients of `shape` on the first `modes` modes, and the matching
// reconstruction.
Eigen::VectorXd project(const PCAModel& model, const geometry::PointSet& shape, std::size_t modes);
Eigen::VectorXd reconstruct(const PCAModel& model, const Eigen::VectorXd& coefficients);

// Mean over points of the Euclidean distance between equally ordered sets.
double mean_point_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// c(m) = Σ_{i≤m} λ_i / Σ λ_i for m = 1..rank.
std::vector<double> compactness(const PCAModel& model);
// Entry m−1: mean over test shapes of the mean per-point distance to their
// reconstruction from the first m modes, m = 1..rank.
std::vector<double> generalization(const PCAModel& model, std::span<const geometry::PointSet> test);
// Mean distance from shapes sampled with coefficients ~ N(0, λ_i), i ≤ modes,
// to their nearest training shape. modes may be 0 (every sample is the mean).
double specificity(const PCAModel& model, std::span<const geometry::PointSet> training, std::size_t modes,
                   std::size_t samples, std::uint64_t seed);
std::vector<double> specificity_curve(const PCAModel& model, std::span<const geometry::PointSet> training,
                                      std::size_t samples, std::uint64_t seed);

struct ModeSweep {
  std::size_t mode = 0;  // 0-based
  double spread = 0.0;   // √λ for PCA, latent standard deviation for the VAE
  std::vector<double> k_values;
  std::vector<geometry::PointSet> shapes;
  // Per point, |p(k) − p(0)| signed by whether the motion points away from
  // the centroid of the k = 0 shape.
  std::vector<std::vector<double>> signed_displacement;
};

// mean + k·√λ_mode·mode_vector for each k (mode is 0-based).
ModeSweep pca_mode_sweep(const PCAModel& model, std::size_t mode, std::span<const double> k_values);

// Latent dimensions ordered by the sample standard deviation of the training
// μ codes, descending (lower index first on ties).
std::vector<std::size_t> rank_latent_dimensions(const Eigen::MatrixXd& latents);
// μ-head codes of the given correspondence sets, one row per set.
Eigen::MatrixXd latent_means(const nn::SPVAE& spvae, std::span<const geometry::PointSet> shapes);
// Decodes `base` perturbed along the dimension at position `mode_rank` of
// the ranking by k·(its standard deviation).
ModeSweep vae_mode_sweep(const nn::SPVAE& spvae, const Eigen::MatrixXd& training_latents, std::size_t mode_rank,
                         std::span<const double> k_values, const Eigen::VectorXd& base);

struct SampleMetrics {
  std::string sample_id;
  double chamfer_l1 = 0.0;
  double surface_distance = 0.0;
};

struct MetricReport {
  std::vector<SampleMetrics> samples;
  double chamfer_mean = 0.0, chamfer_std = 0.0;
  double surface_mean = 0.0, surface_std = 0.0;
};

// L1 two-way Chamfer between each correspondence set and its mesh's vertices,
// and the mean point-to-surface distance from the correspondences to the
// mesh. Standard deviations use the N − 1 divisor (0 for one sample).
MetricReport evaluate_correspondences(std::span<const geometry::PointSet> correspondences,
                                      std::span<const geometry::Mesh> meshes, std::span<const std::string> ids);
// Infers correspondences for each mesh, then evaluates them as above.
MetricReport evaluate_test(train::Pipeline& pipeline, std::span<const geometry::Mesh> meshes,
                           std::span<const std::string> ids);
void write_report_csv(std::ostream& out, const MetricReport& report);

}  // namespace meshssm::analysis
