#include "meshssm/analysis/shape_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "meshssm/error.hpp"
#include "meshssm/geometry/surface_distance.hpp"
#include "meshssm/losses/losses.hpp"
#include "meshssm/nd/random.hpp"

namespace meshssm::analysis {
namespace {

void require_dimension(const PCAModel& model, const geometry::PointSet& shape) {
  if (shape.size() * 3 != model.dimension())
    throw ValidationError("shape has " + std::to_string(shape.size()) + " points, model expects " +
                          std::to_string(model.point_count()));
}

double mean_and_std(const std::vector<double>& v, double& stddev) {
  if (v.empty()) {
    stddev = 0.0;
    return 0.0;
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return mean;
}

std::vector<std::vector<double>> signed_displacements(const std::vector<geometry::PointSet>& shapes,
                                                      const geometry::PointSet& base) {
  const auto center = geometry::centroid(base.points);
  std::vector<std::vector<double>> out;
  for (const auto& s : shapes) {
    std::vector<double> d(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      double outward = 0.0;
      for (int c = 0; c < 3; ++c) outward += (s.points[i][c] - base.points[i][c]) * (base.points[i][c] - center[c]);
      const double magnitude = geometry::distance(s.points[i], base.points[i]);
      d[i] = outward < 0.0 ? -magnitude : magnitude;
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

Eigen::VectorXd flatten(const geometry::PointSet& shape) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(shape.size() * 3));
  for (std::size_t i = 0; i < shape.size(); ++i)
    for (int c = 0; c < 3; ++c) v(static_cast<Eigen::Index>(3 * i + c)) = shape.points[i][c];
  return v;
}

geometry::PointSet unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) throw DimensionError("flattened shape length is not a multiple of 3");
  return geometry::PointSet::from_flat({flat.data(), static_cast<std::size_t>(flat.size())});
}

PCAModel fit_pca(std::span<const geometry::PointSet> shapes) {
  if (shapes.size() < 2) throw ValidationError("PCA needs at least 2 shapes, got " + std::to_string(shapes.size()));
  const std::size_t m = shapes.front().size();
  if (m == 0) throw ValidationError("PCA shapes have no points");
  const auto n = static_cast<Eigen::Index>(shapes.size());
  const auto dim = static_cast<Eigen::Index>(3 * m);
  Eigen::MatrixXd data(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (shapes[static_cast<std::size_t>(i)].size() != m)
      throw ValidationError("PCA shape " + std::to_string(i) + " has " +
                            std::to_string(shapes[static_cast<std::size_t>(i)].size()) + " points, expected " +
                            std::to_string(m));
    data.row(i) = flatten(shapes[static_cast<std::size_t>(i)]).transpose();
  }
  PCAModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? s(0) * static_cast<double>(std::max(n, dim)) * std::numeric_limits<double>::epsilon()
                                     : 0.0;
  Eigen::Index rank = 0;
  while (rank < s.size() && rank < n - 1 && s(rank) > cutoff) ++rank;
  model.modes = svd.matrixV().leftCols(rank);
  model.variances = s.head(rank).array().square() / static_cast<double>(n - 1);
  for (Eigen::Index j = 0; j < rank; ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < dim; ++i)
      if (std::abs(model.modes(i, j)) > std::abs(model.modes(arg, j))) arg = i;
    if (model.modes(arg, j) < 0.0) model.modes.col(j) *= -1.0;
  }
  return model;
}

Eigen::VectorXd project(const PCAModel& model, const geometry::PointSet& shape, std::size_t modes) {
  require_dimension(model, shape);
  if (modes > model.rank())
    throw ValidationError("requested " + std::to_string(modes) + " modes, model has " + std::to_string(model.rank()));
  return model.modes.leftCols(static_cast<Eigen::Index>(modes)).transpose() * (flatten(shape) - model.mean);
}

Eigen::VectorXd reconstruct(const PCAModel& model, const Eigen::VectorXd& coefficients) {
  if (static_cast<std::size_t>(coefficients.size()) > model.rank())
    throw ValidationError("more coefficients than model modes");
  return model.mean + model.modes.leftCols(coefficients.size()) * coefficients;
}

double mean_point_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() % 3 != 0 || a.size() == 0)
    throw DimensionError("mean_point_distance: shapes differ or are empty");
  const Eigen::Index m = a.size() / 3;
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) total += (a.segment<3>(3 * i) - b.segment<3>(3 * i)).norm();
  return total / static_cast<double>(m);
}

std::vector<double> compactness(const PCAModel& model) {
  std::vector<double> cumulative(model.rank());
  double running = 0.0;
  for (std::size_t i = 0; i < model.rank(); ++i) {
    running += model.variances(static_cast<Eigen::Index>(i));
    cumulative[i] = running;
  }
  for (auto& c : cumulative) c /= running;
  return cumulative;
}

std::vector<double> generalization(const PCAModel& model, std::span<const geometry::PointSet> test) {
  if (test.empty()) throw ValidationError("generalization needs at least one test shape");
  std::vector<double> curve(model.rank(), 0.0);
  for (const auto& shape : test) {
    const auto full = project(model, shape, model.rank());
    const auto target = flatten(shape);
    for (std::size_t m = 1; m <= model.rank(); ++m)
      curve[m - 1] += mean_point_distance(target, reconstruct(model, full.head(static_cast<Eigen::Index>(m))));
  }
  for (auto& v : curve) v /= static_cast<double>(test.size());
  return curve;
}

double specificity(const PCAModel& model, std::span<const geometry::PointSet> training, std::size_t modes,
                   std::size_t samples, std::uint64_t seed) {
  if (training.empty()) throw ValidationError("specificity needs training shapes");
  if (samples == 0) throw ValidationError("specificity needs at least one sample");
  if (modes > model.rank())
    throw ValidationError("requested " + std::to_string(modes) + " modes, model has " + std::to_string(model.rank()));
  std::vector<Eigen::VectorXd> train;
  for (const auto& t : training) {
    require_dimension(model, t);
    train.push_back(flatten(t));
  }
  nd::Rng rng(seed);
  double total = 0.0;
  Eigen::VectorXd coeff(static_cast<Eigen::Index>(modes));
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < modes; ++i)
      coeff(static_cast<Eigen::Index>(i)) = std::sqrt(model.variances(static_cast<Eigen::Index>(i))) * rng.normal();
    const auto shape = reconstruct(model, coeff);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& t : train) nearest = std::min(nearest, mean_point_distance(shape, t));
    total += nearest;
  }
  return total / static_cast<double>(samples);
}

std::vector<double> specificity_curve(const PCAModel& model, std::span<const geometry::PointSet> training,
                                      std::size_t samples, std::uint64_t seed) {
  std::vector<double> curve;
  for (std::size_t m = 1; m <= model.rank(); ++m) curve.push_back(specificity(model, training, m, samples, seed));
  return curve;
}

ModeSweep pca_mode_sweep(const PCAModel& model, std::size_t mode, std::span<const double> k_values) {
  if (mode >= model.rank())
    throw ValidationError("mode " + std::to_string(mode + 1) + " requested, model has " + std::to_string(model.rank()) +
                          " modes");
  ModeSweep sweep;
  sweep.mode = mode;
  sweep.spread = std::sqrt(model.variances(static_cast<Eigen::Index>(mode)));
  sweep.k_values.assign(k_values.begin(), k_values.end());
  const Eigen::VectorXd direction = model.modes.col(static_cast<Eigen::Index>(mode));
  for (double k : k_values) sweep.shapes.push_back(unflatten(model.mean + (k * sweep.spread) * direction));
  sweep.signed_displacement = signed_displacements(sweep.shapes, unflatten(model.mean));
  return sweep;
}

std::vector<std::size_t> rank_latent_dimensions(const Eigen::MatrixXd& latents) {
  if (latents.rows() < 2) throw ValidationError("ranking latent dimensions needs at least 2 codes");
  std::vector<double> stddev(static_cast<std::size_t>(latents.cols()));
  for (Eigen::Index c = 0; c < latents.cols(); ++c) {
    const double mean = latents.col(c).mean();
    stddev[static_cast<std::size_t>(c)] =
        std::sqrt((latents.col(c).array() - mean).square().sum() / static_cast<double>(latents.rows() - 1));
  }
  std::vector<std::size_t> order(stddev.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return stddev[a] > stddev[b]; });
  return order;
}

Eigen::MatrixXd latent_means(const nn::SPVAE& spvae, std::span<const geometry::PointSet> shapes) {
  const std::size_t latent = spvae.config().latent_dim;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(shapes.size()), static_cast<Eigen::Index>(latent));
  nd::NoGradGuard no_grad;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto posterior = spvae.encode(train::points_tensor(shapes[i]));
    const auto mu = posterior.mu.data();
    for (std::size_t j = 0; j < latent; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mu[j];
  }
  return out;
}

ModeSweep vae_mode_sweep(const nn::SPVAE& spvae, const Eigen::MatrixXd& training_latents, std::size_t mode_rank,
                         std::span<const double> k_values, const Eigen::VectorXd& base) {
  const std::size_t latent = spvae.config().latent_dim;
  if (static_cast<std::size_t>(training_latents.cols()) != latent || static_cast<std::size_t>(base.size()) != latent)
    throw DimensionError("latent codes do not match the SP-VAE latent size " + std::to_string(latent));
  if (mode_rank >= latent)
    throw ValidationError("mode rank " + std::to_string(mode_rank + 1) + " exceeds latent size " + std::to_string(latent));
  const auto order = rank_latent_dimensions(training_latents);
  const std::size_t dim = order[mode_rank];
  const auto column = training_latents.col(static_cast<Eigen::Index>(dim));
  const double mean = column.mean();
  ModeSweep sweep;
  sweep.mode = dim;
  sweep.spread = std::sqrt((column.array() - mean).square().sum() / static_cast<double>(training_latents.rows() - 1));
  sweep.k_values.assign(k_values.begin(), k_values.end());
  nd::NoGradGuard no_grad;
  auto decode = [&](const Eigen::VectorXd& z) {
    return train::to_point_set(
        spvae.decode(nd::Tensor::from({1, latent}, std::vector<double>(z.data(), z.data() + z.size()))));
  };
  for (double k : k_values) {
    Eigen::VectorXd z = base;
    z(static_cast<Eigen::Index>(dim)) += k * sweep.spread;
    sweep.shapes.push_back(decode(z));
  }
  sweep.signed_displacement = signed_displacements(sweep.shapes, decode(base));
  return sweep;
}

MetricReport evaluate_correspondences(std::span<const geometry::PointSet> correspondences,
                                      std::span<const geometry::Mesh> meshes, std::span<const std::string> ids) {
  if (correspondences.size() != meshes.size() || ids.size() != meshes.size())
    throw ValidationError("evaluation needs one correspondence set and one id per mesh");
  if (meshes.empty()) throw ValidationError("evaluation needs at least one mesh");
  MetricReport report;
  std::vector<double> chamfer, surface;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    SampleMetrics s;
    s.sample_id = ids[i];
    s.chamfer_l1 = losses::two_way_chamfer(correspondences[i], meshes[i].vertex_set(), losses::ChamferNorm::l1);
    s.surface_distance = geometry::point_to_mesh_distance(correspondences[i], meshes[i]).mean;
    chamfer.push_back(s.chamfer_l1);
    surface.push_back(s.surface_distance);
    report.samples.push_back(std::move(s));
  }
  report.chamfer_mean = mean_and_std(chamfer, report.chamfer_std);
  report.surface_mean = mean_and_std(surface, report.surface_std);
  return report;
}

MetricReport evaluate_test(train::Pipeline& pipeline, std::span<const geometry::Mesh> meshes,
                           std::span<const std::string> ids) {
  const auto correspondences = train::infer(pipeline, meshes);
  return evaluate_correspondences(correspondences, meshes, ids);
}

void write_report_csv(std::ostream& out, const MetricReport& report) {
  char buf[128];
  out << "sample_id,chamfer_l1,surface_to_surface_mm\n";
  for (const auto& s : report.samples) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", s.chamfer_l1, s.surface_distance);
    out << s.sample_id << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,%.17g,%.17g\n", report.chamfer_mean, report.surface_mean);
  out << buf;
  std::snprintf(buf, sizeof(buf), "std,%.17g,%.17g\n", report.chamfer_std, report.surface_std);
  out << buf;
}

}  // namespace meshssm::analysis
