#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "meshssm/geometry/mesh.hpp"
#include "meshssm/geometry/neighbors.hpp"
#include "meshssm/nd/optim.hpp"
#include "meshssm/nd/random.hpp"
#include "meshssm/nn/archive.hpp"
#include "meshssm/train/config.hpp"
#include "meshssm/train/pipeline.hpp"

namespace meshssm::train {

enum class Phase { burn_in, correspondence, spvae };
std::string_view phase_name(Phase phase);

// One row of the training log. Terms of the module that did not train in the
// epoch are NaN (written as empty CSV fields).
struct EpochRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::burn_in;
  double lr = 0.0;
  double alpha = 0.0;
  double chamfer_l2 = 0.0;
  double chamfer_l1 = 0.0;
  double vertex_mse = 0.0;
  double vae_recon = 0.0;
  double vae_kl = 0.0;
  double wall_ms = 0.0;
};

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

// Counter-based stream seeds derived from the single configured seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Two-stage optimization: burn-in epochs train the mesh autoencoder and
// IM-NET on the correspondence loss; afterwards epochs alternate between that
// and the SP-VAE (on detached correspondences), and the template is replaced
// by the decoded prior mean every `template_refresh_interval` alternating
// epochs.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::vector<geometry::Mesh> training, std::vector<geometry::Mesh> validation,
          const geometry::PointSet& initial_template);
  // Continues from a checkpoint written by checkpoint(); the datasets must be
  // the ones the checkpoint was trained on.
  static Trainer resume(const nn::Archive& checkpoint, std::vector<geometry::Mesh> training,
                        std::vector<geometry::Mesh> validation);

  Phase phase_of(std::size_t epoch) const;
  EpochRecord run_epoch();
  // Runs until `epochs` more epochs are done or training is complete.
  void run(std::size_t epochs);
  void run() { run(config_.epochs); }
  bool done() const { return epoch_ >= config_.epochs; }
  // Extends or shortens the run; must not drop below the completed epochs.
  void set_total_epochs(std::size_t epochs);

  std::size_t epoch() const { return epoch_; }
  const TrainConfig& config() const { return config_; }
  Pipeline& pipeline() { return pipeline_; }
  const Pipeline& pipeline() const { return pipeline_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  std::uint64_t correspondence_steps() const { return adam_correspondence_.step; }
  std::uint64_t spvae_steps() const { return adam_spvae_.step; }
  std::size_t template_refreshes() const { return template_refreshes_; }

  // Correspondence loss on the validation meshes (eval mode, final α and γ).
  double validation_loss();
  double best_validation_loss() const { return best_validation_; }
  std::optional<std::size_t> best_epoch() const { return best_epoch_; }
  // Pipeline snapshot with the lowest validation loss (the current one when
  // there is no validation set).
  Pipeline best_pipeline() const;

  nn::Archive checkpoint() const;

  std::function<void(const EpochRecord&)> on_epoch;

 private:
  struct Sample {
    std::vector<double> vertices;
    geometry::NeighborIndex neighbors;
  };

  static std::vector<Sample> prepare(std::span<const geometry::Mesh> meshes, std::size_t vertex_count, std::size_t k);
  static std::uint64_t dataset_hash(std::span<const geometry::Mesh> meshes);
  std::vector<std::size_t> shuffled_order();
  nd::Tensor stack_vertices(std::span<const std::size_t> ids, const std::vector<Sample>& samples) const;
  std::vector<std::uint32_t> stack_neighbors(std::span<const std::size_t> ids, const std::vector<Sample>& samples) const;

  void correspondence_epoch(EpochRecord& record);
  void spvae_epoch(EpochRecord& record);
  std::vector<std::vector<double>> detached_correspondences();
  void track_validation();

  TrainConfig config_;
  std::vector<Sample> training_;
  std::vector<Sample> validation_;
  std::uint64_t dataset_hash_ = 0;
  Pipeline pipeline_;
  nd::AdamState adam_correspondence_;
  nd::AdamState adam_spvae_;
  nd::Rng shuffle_rng_;
  nd::Rng noise_rng_;
  nd::Rng template_rng_;
  std::size_t epoch_ = 0;
  std::size_t alternating_done_ = 0;
  std::size_t last_refresh_block_ = 0;
  std::size_t template_refreshes_ = 0;
  double best_validation_ = 0.0;
  std::optional<std::size_t> best_epoch_;
  nn::Archive best_;
  std::vector<EpochRecord> history_;
};

}  // namespace meshssm::train
