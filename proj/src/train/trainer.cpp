#include "meshssm/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "meshssm/error.hpp"
#include "meshssm/losses/losses.hpp"
#include "meshssm/nd/ops.hpp"

namespace meshssm::train {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_field(std::ostream& out, double value) {
  out << ',';
  if (std::isnan(value)) return;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out << buf;
}

void save_adam(nn::Archive& archive, const std::string& prefix, const nd::AdamState& state) {
  archive.put_tensor(prefix + ".scalars", {5},
                     std::vector<double>{static_cast<double>(state.step), state.lr, state.beta1, state.beta2, state.eps});
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    archive.put_tensor(prefix + ".m" + std::to_string(i), {state.first_moment[i].size()}, state.first_moment[i]);
    archive.put_tensor(prefix + ".v" + std::to_string(i), {state.second_moment[i].size()}, state.second_moment[i]);
  }
}

void load_adam(const nn::Archive& archive, const std::string& prefix, nd::AdamState& state) {
  const auto& s = archive.tensor(prefix + ".scalars").values;
  if (s.size() != 5) throw ValidationError("checkpoint optimizer record '" + prefix + "' is malformed");
  state.step = static_cast<std::uint64_t>(s[0]);
  state.lr = s[1];
  state.beta1 = s[2];
  state.beta2 = s[3];
  state.eps = s[4];
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    archive.read_into(prefix + ".m" + std::to_string(i), state.first_moment[i]);
    archive.read_into(prefix + ".v" + std::to_string(i), state.second_moment[i]);
  }
}


}  // namespace

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::burn_in:
      return "burn_in";
    case Phase::correspondence:
      return "correspondence";
    case Phase::spvae:
      return "spvae";
  }
  return "unknown";
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,phase,lr,alpha,chamfer_l2,chamfer_l1,vertex_mse,vae_recon,vae_kl,wall_ms\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << phase_name(r.phase);
    for (double v : {r.lr, r.alpha, r.chamfer_l2, r.chamfer_l1, r.vertex_mse, r.vae_recon, r.vae_kl}) write_field(out, v);
    char buf[32];
    std::snprintf(buf, sizeof(buf), ",%.3f\n", r.wall_ms);
    out << buf;
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over seed and stream
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Trainer::Sample> Trainer::prepare(std::span<const geometry::Mesh> meshes, std::size_t vertex_count,
                                              std::size_t k) {
  std::vector<Sample> out;
  out.reserve(meshes.size());
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    const auto& mesh = meshes[i];
    if (mesh.vertex_count() != vertex_count)
      throw ValidationError("mesh " + std::to_string(i) + " has " + std::to_string(mesh.vertex_count()) +
                            " vertices, expected " + std::to_string(vertex_count) + " (pad meshes to a common count)");
    geometry::validate(mesh);
    out.push_back(Sample{mesh.vertex_set().flat(), geometry::geodesic_knn(mesh, k)});
  }
  return out;
}

std::uint64_t Trainer::dataset_hash(std::span<const geometry::Mesh> meshes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& m : meshes) {
    hash = nn::fnv1a({reinterpret_cast<const unsigned char*>(m.vertices.data()), m.vertices.size() * sizeof(geometry::Point3)}, hash);
    hash = nn::fnv1a({reinterpret_cast<const unsigned char*>(m.faces.data()), m.faces.size() * sizeof(geometry::Triangle)}, hash);
  }
  return hash;
}

Trainer::Trainer(const TrainConfig& config, std::vector<geometry::Mesh> training, std::vector<geometry::Mesh> validation,
                 const geometry::PointSet& initial_template)
    : config_(config),
      shuffle_rng_(derive_seed(config.seed, 4)),
      noise_rng_(derive_seed(config.seed, 5)),
      template_rng_(derive_seed(config.seed, 6)),
      best_validation_(std::numeric_limits<double>::infinity()) {
  config_.validate();
  if (training.size() < 2) throw ValidationError("training needs at least 2 meshes, got " + std::to_string(training.size()));
  if (config_.batch_size > training.size())
    throw ValidationError("batch_size " + std::to_string(config_.batch_size) + " exceeds the " +
                          std::to_string(training.size()) + " training meshes");
  if (initial_template.size() == 0) throw ValidationError("template has no points");
  for (const auto& p : initial_template.points)
    for (double c : p)
      if (!std::isfinite(c)) throw ValidationError("template has non-finite coordinates");

  const std::size_t n = training.front().vertex_count();
  training_ = prepare(training, n, config_.k);
  validation_ = prepare(validation, n, config_.k);
  dataset_hash_ = dataset_hash(training);

  pipeline_.mesh_ae = nn::MeshAutoencoder(config_.mesh_ae_config(n), derive_seed(config_.seed, 1));
  pipeline_.imnet = nn::IMNet(config_.imnet_config(), derive_seed(config_.seed, 2));
  pipeline_.spvae = nn::SPVAE(config_.spvae_config(initial_template.size()), derive_seed(config_.seed, 3));
  pipeline_.template_points = initial_template;

  const auto corr = pipeline_.correspondence_parameters();
  const auto vae = pipeline_.spvae_parameters();
  adam_correspondence_ = nd::make_adam_state(corr, config_.lr_mae);
  adam_spvae_ = nd::make_adam_state(vae, config_.lr_spvae);
}

Phase Trainer::phase_of(std::size_t epoch) const {
  if (epoch < config_.burn_in_epochs) return Phase::burn_in;
  return (epoch - config_.burn_in_epochs) % 2 == 0 ? Phase::correspondence : Phase::spvae;
}

void Trainer::set_total_epochs(std::size_t epochs) {
  if (epochs < epoch_)
    throw ValidationError("cannot set epochs to " + std::to_string(epochs) + " after " + std::to_string(epoch_) +
                          " completed epochs");
  TrainConfig next = config_;
  next.epochs = epochs;
  next.validate();
  config_ = next;
}

std::vector<std::size_t> Trainer::shuffled_order() {
  std::vector<std::size_t> order(training_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng_.index(i)]);
  return order;
}

nd::Tensor Trainer::stack_vertices(std::span<const std::size_t> ids, const std::vector<Sample>& samples) const {
  const std::size_t n = pipeline_.vertex_count();
  std::vector<double> values;
  values.reserve(ids.size() * n * 3);
  for (auto id : ids) values.insert(values.end(), samples[id].vertices.begin(), samples[id].vertices.end());
  return nd::Tensor::from({ids.size() * n, 3}, std::move(values));
}

std::vector<std::uint32_t> Trainer::stack_neighbors(std::span<const std::size_t> ids,
                                                    const std::vector<Sample>& samples) const {
  std::vector<const geometry::NeighborIndex*> parts;
  for (auto id : ids) parts.push_back(&samples[id].neighbors);
  return nn::stack_neighbors(parts, pipeline_.vertex_count());
}

void Trainer::correspondence_epoch(EpochRecord& record) {
  auto params = pipeline_.correspondence_parameters();
  adam_correspondence_.lr = nd::StepLRSchedule{config_.lr_mae, config_.lr_step_interval, config_.lr_step_factor}.lr(epoch_);
  record.lr = adam_correspondence_.lr;
  record.alpha = config_.alpha(epoch_);
  const losses::LossWeights weights{record.alpha, config_.gamma};
  const auto template_tensor = points_tensor(pipeline_.template_points);

  const auto order = shuffled_order();
  double l2 = 0.0, l1 = 0.0, mse = 0.0;
  for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += config_.batch_size, ++batch) {
    const std::size_t count = std::min(config_.batch_size, order.size() - begin);
    const std::span<const std::size_t> ids(order.data() + begin, count);
    try {
      const auto vertices = stack_vertices(ids, training_);
      const auto neighbors = stack_neighbors(ids, training_);
      const auto z = pipeline_.mesh_ae.encode(vertices, neighbors, count, nd::Mode::train);
      const auto reconstructed = pipeline_.mesh_ae.decode(z);
      const auto correspondences = pipeline_.imnet.deform(z, template_tensor);
      const auto loss = losses::correspondence_loss_batch(vertices, correspondences, reconstructed, count, weights);
      nd::zero_grads(params);
      loss.total.backward();
      nd::adam_step(params, adam_correspondence_);
      l2 += loss.chamfer_l2 * static_cast<double>(count);
      l1 += loss.chamfer_l1 * static_cast<double>(count);
      mse += loss.vertex_mse * static_cast<double>(count);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch_) + ", batch " + std::to_string(batch) + ": " + e.what());
    }
  }
  const double total = static_cast<double>(order.size());
  record.chamfer_l2 = l2 / total;
  record.chamfer_l1 = l1 / total;
  record.vertex_mse = mse / total;
}

std::vector<std::vector<double>> Trainer::detached_correspondences() {
  nd::NoGradGuard no_grad;
  const auto template_tensor = points_tensor(pipeline_.template_points);
  const std::size_t m = pipeline_.point_count();
  std::vector<std::vector<double>> out;
  out.reserve(training_.size());
  std::vector<std::size_t> ids;
  for (std::size_t begin = 0; begin < training_.size(); begin += config_.batch_size) {
    const std::size_t count = std::min(config_.batch_size, training_.size() - begin);
    ids.resize(count);
    std::iota(ids.begin(), ids.end(), begin);
    const auto z = pipeline_.mesh_ae.encode(stack_vertices(ids, training_), stack_neighbors(ids, training_), count,
                                            nd::Mode::eval);
    const auto deformed = pipeline_.imnet.deform(z, template_tensor);
    const auto c = deformed.data();
    for (std::size_t b = 0; b < count; ++b) out.emplace_back(c.begin() + b * m * 3, c.begin() + (b + 1) * m * 3);
  }
  return out;
}

void Trainer::spvae_epoch(EpochRecord& record) {
  auto params = pipeline_.spvae_parameters();
  adam_spvae_.lr = nd::StepLRSchedule{config_.lr_spvae, config_.lr_step_interval, config_.lr_step_factor}.lr(epoch_);
  record.lr = adam_spvae_.lr;
  record.alpha = config_.alpha(epoch_);
  const auto targets = detached_correspondences();
  const std::size_t m = pipeline_.point_count();

  const auto order = shuffled_order();
  double recon = 0.0, kl = 0.0;
  for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += config_.batch_size, ++batch) {
    const std::size_t count = std::min(config_.batch_size, order.size() - begin);
    try {
      std::vector<double> values;
      values.reserve(count * m * 3);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& t = targets[order[begin + i]];
        values.insert(values.end(), t.begin(), t.end());
      }
      const auto c = nd::Tensor::from({count * m, 3}, std::move(values));
      const auto posterior = pipeline_.spvae.encode(c);
      const auto z = nn::reparameterize(posterior.mu, posterior.log_var, noise_rng_);
      const auto loss = losses::spvae_loss(c, pipeline_.spvae.decode(z), posterior.mu, posterior.log_var, config_.spvae_beta);
      nd::zero_grads(params);
      loss.total.backward();
      nd::adam_step(params, adam_spvae_);
      recon += loss.reconstruction * static_cast<double>(count);
      kl += loss.kl * static_cast<double>(count);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch_) + ", SP-VAE batch " + std::to_string(batch) + ": " + e.what());
    }
  }
  record.vae_recon = recon / static_cast<double>(order.size());
  record.vae_kl = kl / static_cast<double>(order.size());
}

double Trainer::validation_loss() {
  if (validation_.empty()) throw ValidationError("no validation meshes were supplied");
  nd::NoGradGuard no_grad;
  const auto template_tensor = points_tensor(pipeline_.template_points);
  const losses::LossWeights weights{config_.alpha_end, config_.gamma};
  double total = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t begin = 0; begin < validation_.size(); begin += config_.batch_size) {
    const std::size_t count = std::min(config_.batch_size, validation_.size() - begin);
    ids.resize(count);
    std::iota(ids.begin(), ids.end(), begin);
    const auto vertices = stack_vertices(ids, validation_);
    const auto z = pipeline_.mesh_ae.encode(vertices, stack_neighbors(ids, validation_), count, nd::Mode::eval);
    const auto loss = losses::correspondence_loss_batch(vertices, pipeline_.imnet.deform(z, template_tensor),
                                                        pipeline_.mesh_ae.decode(z), count, weights);
    total += loss.total.item() * static_cast<double>(count);
  }
  return total / static_cast<double>(validation_.size());
}

void Trainer::track_validation() {
  if (validation_.empty()) return;
  const double loss = validation_loss();
  if (loss < best_validation_) {
    best_validation_ = loss;
    best_epoch_ = epoch_;
    best_ = nn::Archive();
    pipeline_.save(best_);
  }
}

Pipeline Trainer::best_pipeline() const {
  if (!best_epoch_) {
    nn::Archive current;
    pipeline_.save(current);
    return Pipeline::load(current);
  }
  return Pipeline::load(best_);
}

EpochRecord Trainer::run_epoch() {
  if (done()) throw ValidationError("training already completed " + std::to_string(config_.epochs) + " epochs");
  const auto start = std::chrono::steady_clock::now();
  EpochRecord record;
  record.epoch = epoch_;
  record.phase = phase_of(epoch_);
  record.chamfer_l2 = record.chamfer_l1 = record.vertex_mse = record.vae_recon = record.vae_kl = kNaN;

  bool refreshed = false;
  if (record.phase == Phase::spvae) {
    spvae_epoch(record);
  } else {
    correspondence_epoch(record);
  }
  if (record.phase != Phase::burn_in) {
    ++alternating_done_;
    const std::size_t block = alternating_done_ / config_.template_refresh_interval;
    if (record.phase == Phase::spvae && block > last_refresh_block_ && adam_spvae_.step > 0) {
      pipeline_.template_points = update_template(pipeline_.spvae, config_.prior_sample_count, template_rng_);
      last_refresh_block_ = block;
      ++template_refreshes_;
      refreshed = true;
    }
  }
  if (record.phase != Phase::spvae || refreshed) track_validation();

  record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ++epoch_;
  history_.push_back(record);
  if (on_epoch) on_epoch(record);
  return record;
}

void Trainer::run(std::size_t epochs) {
  for (std::size_t i = 0; i < epochs && !done(); ++i) run_epoch();
}

nn::Archive Trainer::checkpoint() const {
  nn::Archive archive;
  archive.put_text("train_config", config_.to_text());
  archive.put_text("dataset_hash", std::to_string(dataset_hash_));
  pipeline_.save(archive);
  save_adam(archive, "adam_correspondence", adam_correspondence_);
  save_adam(archive, "adam_spvae", adam_spvae_);
  archive.put_text("rng.shuffle", shuffle_rng_.serialize());
  archive.put_text("rng.noise", noise_rng_.serialize());
  archive.put_text("rng.template", template_rng_.serialize());
  archive.put_tensor("trainer.counters", {6},
                     std::vector<double>{static_cast<double>(epoch_), static_cast<double>(alternating_done_),
                                         static_cast<double>(last_refresh_block_),
                                         static_cast<double>(template_refreshes_), best_validation_,
                                         best_epoch_ ? static_cast<double>(*best_epoch_) : -1.0});
  std::vector<double> rows;
  for (const auto& r : history_) {
    rows.insert(rows.end(), {static_cast<double>(r.epoch), static_cast<double>(static_cast<int>(r.phase)), r.lr, r.alpha,
                             r.chamfer_l2, r.chamfer_l1, r.vertex_mse, r.vae_recon, r.vae_kl, r.wall_ms});
  }
  if (!history_.empty()) archive.put_tensor("trainer.history", {history_.size(), 10}, rows);
  if (best_epoch_) archive.put_text("trainer.best", best_.serialize());
  return archive;
}

Trainer Trainer::resume(const nn::Archive& checkpoint, std::vector<geometry::Mesh> training,
                        std::vector<geometry::Mesh> validation) {
  std::istringstream config_text(checkpoint.text("train_config"));
  const auto config = parse_train_config(config_text, "checkpoint");
  if (checkpoint.text("dataset_hash") != std::to_string(dataset_hash(training)))
    throw ValidationError("checkpoint was trained on a different set of training meshes");
  auto stored = Pipeline::load(checkpoint);
  Trainer trainer(config, std::move(training), std::move(validation), stored.template_points);
  if (stored.vertex_count() != trainer.pipeline_.vertex_count())
    throw ValidationError("checkpoint vertex count does not match the training meshes");
  trainer.pipeline_ = std::move(stored);
  const auto corr = trainer.pipeline_.correspondence_parameters();
  const auto vae = trainer.pipeline_.spvae_parameters();
  trainer.adam_correspondence_ = nd::make_adam_state(corr, config.lr_mae);
  trainer.adam_spvae_ = nd::make_adam_state(vae, config.lr_spvae);
  load_adam(checkpoint, "adam_correspondence", trainer.adam_correspondence_);
  load_adam(checkpoint, "adam_spvae", trainer.adam_spvae_);
  trainer.shuffle_rng_.deserialize(checkpoint.text("rng.shuffle"));
  trainer.noise_rng_.deserialize(checkpoint.text("rng.noise"));
  trainer.template_rng_.deserialize(checkpoint.text("rng.template"));
  const auto& c = checkpoint.tensor("trainer.counters").values;
  if (c.size() != 6) throw ValidationError("checkpoint trainer counters are malformed");
  trainer.epoch_ = static_cast<std::size_t>(c[0]);
  trainer.alternating_done_ = static_cast<std::size_t>(c[1]);
  trainer.last_refresh_block_ = static_cast<std::size_t>(c[2]);
  trainer.template_refreshes_ = static_cast<std::size_t>(c[3]);
  trainer.best_validation_ = c[4];
  if (c[5] >= 0.0) {
    trainer.best_epoch_ = static_cast<std::size_t>(c[5]);
    trainer.best_ = nn::Archive::deserialize(checkpoint.text("trainer.best"));
  }
  if (checkpoint.has("trainer.history")) {
    const auto& h = checkpoint.tensor("trainer.history");
    for (std::size_t i = 0; i < h.shape[0]; ++i) {
      const double* r = h.values.data() + i * 10;
      trainer.history_.push_back(EpochRecord{static_cast<std::size_t>(r[0]), static_cast<Phase>(static_cast<int>(r[1])),
                                             r[2], r[3], r[4], r[5], r[6], r[7], r[8], r[9]});
    }
  }
  if (trainer.history_.size() != trainer.epoch_) throw ValidationError("checkpoint history length does not match its epoch");
  return trainer;
}

}  // namespace meshssm::train
