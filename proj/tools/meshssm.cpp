// meshssm command-line interface: synth, template, train, infer, evaluate,
// analyze. Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "meshssm/analysis/shape_stats.hpp"
#include "meshssm/error.hpp"
#include "meshssm/geometry/box_bump.hpp"
#include "meshssm/geometry/mesh.hpp"
#include "meshssm/geometry/sampling.hpp"
#include "meshssm/nd/kernels.hpp"
#include "meshssm/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace meshssm;
using nlohmann::ordered_json;

namespace {

// Files are produced under <out_dir>/.staging and moved into place only once
// the command has succeeded, so a failed run leaves earlier outputs intact.
class OutputStage {
 public:
  explicit OutputStage(const fs::path& out_dir) : out_dir_(out_dir), staging_(out_dir / ".staging") {
    fs::create_directories(out_dir_);
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~OutputStage() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return staging_ / name;
  }
  void write(const std::string& name, const std::string& text) {
    std::ofstream out(path(name), std::ios::binary);
    out << text;
    if (!out) throw IoError("failed writing " + (staging_ / name).string());
  }
  void commit() {
    for (const auto& name : names_) fs::rename(staging_ / name, out_dir_ / name);
    names_.clear();
  }
  const fs::path& out_dir() const { return out_dir_; }

 private:
  fs::path out_dir_;
  fs::path staging_;
  std::vector<std::string> names_;
};

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ValidationError("no " + extension + " files in " + dir.string());
  return out;
}

std::vector<geometry::Mesh> load_meshes(const std::vector<fs::path>& paths) {
  std::vector<geometry::Mesh> out;
  for (const auto& p : paths) out.push_back(geometry::load_mesh(p));
  return out;
}

// Resolved settings of one run, written as config.txt next to its outputs.
struct Snapshot {
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  template <class T>
  void add(const std::string& key, const T& value) {
    std::ostringstream s;
    s.precision(17);
    s << value;
    add(key, s.str());
  }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    return out;
  }
};

std::string format_k(double k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", k);
  return buf;
}

void write_values(const fs::path& path, const std::vector<double>& values) {
  std::ofstream out(path);
  char buf[32];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t count = 50;
  double t_min = 0.0;
  double t_max = 1.0;
  std::uint64_t seed = 0;
  geometry::BoxBumpParams params;
  std::string out_dir;
};

void run_synth(const SynthArgs& a) {
  if (a.count < 2) throw ValidationError("synth: count must be at least 2");
  if (!(a.t_min >= 0.0 && a.t_max <= 1.0 && a.t_min <= a.t_max))
    throw ValidationError("synth: t range must satisfy 0 <= t_min <= t_max <= 1");
  a.params.validate();
  OutputStage stage(a.out_dir);
  std::string manifest = "filename,t\n";
  for (std::size_t i = 0; i < a.count; ++i) {
    const double t = a.t_min + (a.t_max - a.t_min) * static_cast<double>(i) / static_cast<double>(a.count - 1);
    char name[64];
    std::snprintf(name, sizeof(name), "box_bump_%03zu.obj", i);
    geometry::save_mesh(stage.path(name), geometry::generate_box_bump(t, a.params, a.seed + i));
    char row[96];
    std::snprintf(row, sizeof(row), "%s,%.17g\n", name, t);
    manifest += row;
  }
  stage.write("manifest.csv", manifest);
  Snapshot s;
  s.add("command", std::string("synth"));
  s.add("count", a.count);
  s.add("t_min", a.t_min);
  s.add("t_max", a.t_max);
  s.add("seed", a.seed);
  s.add("length", a.params.length);
  s.add("width", a.params.width);
  s.add("height", a.params.height);
  s.add("resolution", a.params.resolution);
  s.add("bump_height", a.params.bump_height);
  s.add("bump_sigma", a.params.bump_sigma);
  s.add("bump_x_min", a.params.bump_x_min);
  s.add("bump_x_max", a.params.bump_x_max);
  s.add("noise", a.params.noise);
  stage.write("config.txt", s.text());
  stage.commit();
  std::cout << "wrote " << a.count << " meshes to " << a.out_dir << "\n";
}

// ------------------------------------------------------------- template

struct TemplateArgs {
  std::string mode = "sphere";
  std::string data_dir;
  std::string mesh;
  std::size_t points = 256;
  double radius = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void run_template(const TemplateArgs& a) {
  if (a.points == 0) throw ValidationError("template: points must be positive");
  geometry::PointSet points;
  Snapshot s;
  s.add("command", std::string("template"));
  s.add("mode", a.mode);
  if (a.mode == "sphere") {
    points = geometry::sphere_template(a.points, a.radius);
    s.add("radius", a.radius);
  } else if (a.mode == "medoid") {
    if (a.data_dir.empty()) throw ValidationError("template: medoid mode needs --data_dir");
    const auto paths = list_files(a.data_dir, ".obj");
    const auto meshes = load_meshes(paths);
    const auto index = geometry::compute_medoid(meshes);
    points = geometry::sample_surface_points(meshes[index], a.points, a.seed);
    s.add("data_dir", a.data_dir);
    s.add("medoid", paths[index].filename().string());
  } else if (a.mode == "sample-mesh") {
    if (a.mesh.empty()) throw ValidationError("template: sample-mesh mode needs --mesh");
    points = geometry::sample_surface_points(geometry::load_mesh(a.mesh), a.points, a.seed);
    s.add("mesh", a.mesh);
  } else {
    throw ValidationError("template: unknown mode '" + a.mode + "' (sphere, medoid, sample-mesh)");
  }
  s.add("points", a.points);
  s.add("seed", a.seed);
  OutputStage stage(a.out_dir);
  geometry::save_points(stage.path("template.txt"), points);
  stage.write("config.txt", s.text());
  stage.commit();
  std::cout << "wrote " << points.size() << " template points to " << (fs::path(a.out_dir) / "template.txt").string()
            << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data_dir;
  std::string validation_dir;
  std::string template_path;
  std::string config_path;
  std::string resume;
  std::string out_dir;
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 10;
  std::map<std::string, std::string> overrides;
};

train::TrainConfig resolve_config(const TrainArgs& a) {
  train::TrainConfig cfg = a.config_path.empty() ? train::TrainConfig{} : train::load_train_config(a.config_path);
  for (const auto& [key, value] : a.overrides) cfg.set(key, value);
  return cfg;
}

void run_train(const TrainArgs& a) {
  auto cfg = resolve_config(a);
  auto train_paths = list_files(a.data_dir, ".obj");
  auto meshes = load_meshes(train_paths);
  const std::size_t train_count = meshes.size();
  if (!a.validation_dir.empty())
    for (auto& m : load_meshes(list_files(a.validation_dir, ".obj"))) meshes.push_back(std::move(m));
  auto padded = train::pad_to_common(meshes, cfg.seed);
  std::vector<geometry::Mesh> training(padded.begin(), padded.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<geometry::Mesh> validation(padded.begin() + static_cast<std::ptrdiff_t>(train_count), padded.end());

  OutputStage stage(a.out_dir);
  std::optional<train::Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(train::Trainer::resume(nn::Archive::load(a.resume), training, validation));
    if (a.overrides.count("epochs")) trainer->set_total_epochs(cfg.epochs);
    cfg = trainer->config();
  } else {
    if (a.template_path.empty()) throw ValidationError("train: --template is required unless resuming");
    trainer.emplace(cfg, training, validation, geometry::load_points(a.template_path));
  }
  const fs::path checkpoint_path = fs::path(a.out_dir) / "checkpoint.ckpt";
  trainer->on_epoch = [&](const train::EpochRecord& r) {
    if (a.log_every > 0 && (r.epoch % a.log_every == 0 || r.epoch + 1 == trainer->config().epochs)) {
      std::printf("epoch %zu %s lr=%.3g alpha=%.3f", r.epoch, std::string(train::phase_name(r.phase)).c_str(), r.lr,
                  r.alpha);
      if (r.phase == train::Phase::spvae)
        std::printf(" vae_recon=%.6f vae_kl=%.6f", r.vae_recon, r.vae_kl);
      else
        std::printf(" chamfer_l2=%.6f chamfer_l1=%.6f vertex_mse=%.6f", r.chamfer_l2, r.chamfer_l1, r.vertex_mse);
      std::printf(" (%.0f ms)\n", r.wall_ms);
      std::fflush(stdout);
    }
    if (a.checkpoint_every > 0 && (r.epoch + 1) % a.checkpoint_every == 0) trainer->checkpoint().save(checkpoint_path);
  };
  trainer->run();

  trainer->checkpoint().save(stage.path("checkpoint.ckpt"));
  auto best = trainer->best_pipeline();
  best.save(stage.path("model.ckpt"));
  geometry::save_points(stage.path("template.txt"), trainer->pipeline().template_points);
  {
    std::ofstream csv(stage.path("loss_history.csv"));
    train::write_history_csv(csv, trainer->history());
  }
  ordered_json summary;
  summary["epochs"] = trainer->epoch();
  summary["training_meshes"] = training.size();
  summary["validation_meshes"] = validation.size();
  summary["vertex_count"] = trainer->pipeline().vertex_count();
  summary["template_points"] = trainer->pipeline().point_count();
  summary["correspondence_steps"] = trainer->correspondence_steps();
  summary["spvae_steps"] = trainer->spvae_steps();
  summary["template_refreshes"] = trainer->template_refreshes();
  if (trainer->best_epoch()) {
    summary["best_epoch"] = *trainer->best_epoch();
    summary["best_validation_loss"] = trainer->best_validation_loss();
  }
  summary["seed"] = cfg.seed;
  summary["simd_backend"] = std::string(nd::kernels::backend_name(nd::kernels::active_backend()));
  stage.write("summary.json", summary.dump(2) + "\n");

  Snapshot s;
  s.add("command", std::string("train"));
  s.add("data_dir", a.data_dir);
  s.add("validation_dir", a.validation_dir);
  s.add("template", a.template_path);
  s.add("resume", a.resume);
  std::string text = s.text() + cfg.to_text();
  stage.write("config.txt", text);
  stage.commit();
  std::remove(checkpoint_path.string().append(".tmp").c_str());
  std::cout << "trained " << trainer->epoch() << " epochs; outputs in " << a.out_dir << "\n";
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string model;
  std::string data_dir;
  std::uint64_t seed = 0;
  std::string out_dir;
};

geometry::Mesh match_vertex_count(const geometry::Mesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.vertex_count() > count)
    throw ValidationError("mesh has " + std::to_string(mesh.vertex_count()) + " vertices, model expects at most " +
                          std::to_string(count));
  return geometry::pad_vertices(mesh, count, seed);
}

void run_infer(const InferArgs& a) {
  auto pipeline = train::Pipeline::load(fs::path(a.model));
  const auto paths = list_files(a.data_dir, ".obj");
  OutputStage stage(a.out_dir);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto mesh = match_vertex_count(geometry::load_mesh(paths[i]), pipeline.vertex_count(), a.seed + i);
    geometry::save_points(stage.path(paths[i].stem().string() + ".txt"), train::infer(pipeline, mesh));
  }
  Snapshot s;
  s.add("command", std::string("infer"));
  s.add("model", a.model);
  s.add("data_dir", a.data_dir);
  s.add("seed", a.seed);
  stage.write("config.txt", s.text());
  stage.commit();
  std::cout << "wrote " << paths.size() << " correspondence files to " << a.out_dir << "\n";
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string model;
  std::string data_dir;
  std::string correspondence_dir;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto paths = list_files(a.data_dir, ".obj");
  const auto meshes = load_meshes(paths);
  std::vector<std::string> ids;
  for (const auto& p : paths) ids.push_back(p.stem().string());
  std::vector<geometry::PointSet> correspondences;
  if (!a.model.empty()) {
    auto pipeline = train::Pipeline::load(fs::path(a.model));
    for (std::size_t i = 0; i < meshes.size(); ++i)
      correspondences.push_back(
          train::infer(pipeline, match_vertex_count(meshes[i], pipeline.vertex_count(), a.seed + i)));
  } else {
    for (const auto& id : ids) correspondences.push_back(geometry::load_points(fs::path(a.correspondence_dir) / (id + ".txt")));
  }
  const auto report = analysis::evaluate_correspondences(correspondences, meshes, ids);
  OutputStage stage(a.out_dir);
  {
    std::ofstream csv(stage.path("metrics.csv"));
    analysis::write_report_csv(csv, report);
  }
  ordered_json meta;
  meta["samples"] = report.samples.size();
  meta["chamfer_l1"] = "two-way Chamfer, mean unsquared nearest-neighbour distance in both directions, "
                       "correspondences vs mesh vertices";
  meta["surface_to_surface_mm"] = "mean point-to-surface distance from the correspondence points to the mesh "
                                  "triangles (substitute for a reconstructed surface-to-surface distance)";
  meta["std_divisor"] = "N-1";
  meta["reference_columns"] = ordered_json::array();
  meta["seed"] = a.seed;
  stage.write("metadata.json", meta.dump(2) + "\n");
  Snapshot s;
  s.add("command", std::string("evaluate"));
  s.add("model", a.model);
  s.add("correspondence_dir", a.correspondence_dir);
  s.add("data_dir", a.data_dir);
  s.add("seed", a.seed);
  stage.write("config.txt", s.text());
  stage.commit();
  std::printf("chamfer_l1 %.6g +- %.6g, surface distance %.6g +- %.6g over %zu meshes\n", report.chamfer_mean,
              report.chamfer_std, report.surface_mean, report.surface_std, report.samples.size());
}

// -------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string correspondence_dir;
  std::string test_correspondence_dir;
  std::string model;
  std::size_t modes = 3;
  std::vector<double> k_sigmas{-2.0, -1.0, 0.0, 1.0, 2.0};
  std::size_t specificity_samples = 1000;
  std::uint64_t seed = 0;
  std::string out_dir;
};

std::vector<geometry::PointSet> load_point_sets(const std::string& dir) {
  std::vector<geometry::PointSet> out;
  for (const auto& p : list_files(dir, ".txt")) {
    if (p.filename() == "config.txt") continue;
    out.push_back(geometry::load_points(p));
  }
  return out;
}

void write_sweep(OutputStage& stage, ordered_json& manifest, const analysis::ModeSweep& sweep,
                 const std::string& prefix, const std::string& kind, std::size_t label, const char* spread_key) {
  for (std::size_t i = 0; i < sweep.k_values.size(); ++i) {
    const std::string base = prefix + std::to_string(label) + "_k" + format_k(sweep.k_values[i]);
    geometry::save_points(stage.path(base + ".txt"), sweep.shapes[i]);
    write_values(stage.path(base + "_displacement.txt"), sweep.signed_displacement[i]);
    ordered_json entry;
    entry["type"] = kind;
    entry["mode"] = label;
    if (kind == "vae") entry["latent_dimension"] = sweep.mode;
    entry["k"] = sweep.k_values[i];
    entry[spread_key] = kind == "pca" ? sweep.spread * sweep.spread : sweep.spread;
    entry["points"] = base + ".txt";
    entry["signed_displacement"] = base + "_displacement.txt";
    manifest.push_back(entry);
  }
}

void run_analyze(const AnalyzeArgs& a) {
  const auto training = load_point_sets(a.correspondence_dir);
  const auto test = a.test_correspondence_dir.empty() ? training : load_point_sets(a.test_correspondence_dir);
  const auto model = analysis::fit_pca(training);
  const auto compact = analysis::compactness(model);
  const auto general = analysis::generalization(model, test);
  const auto specific = analysis::specificity_curve(model, training, a.specificity_samples, a.seed);

  OutputStage stage(a.out_dir);
  std::string stats = "modes,eigenvalue,compactness,generalization_mm,specificity_mm\n";
  for (std::size_t m = 0; m < model.rank(); ++m) {
    char row[160];
    std::snprintf(row, sizeof(row), "%zu,%.17g,%.17g,%.17g,%.17g\n", m + 1, model.variances(static_cast<Eigen::Index>(m)),
                  compact[m], general[m], specific[m]);
    stats += row;
  }
  stage.write("shape_stats.csv", stats);
  geometry::save_points(stage.path("pca_mean.txt"), analysis::unflatten(model.mean));

  ordered_json manifest = ordered_json::array();
  const std::size_t pca_modes = std::min(a.modes, model.rank());
  for (std::size_t m = 0; m < pca_modes; ++m)
    write_sweep(stage, manifest, analysis::pca_mode_sweep(model, m, a.k_sigmas), "pca_mode", "pca", m + 1, "eigenvalue");
  if (!a.model.empty()) {
    const auto pipeline = train::Pipeline::load(fs::path(a.model));
    const auto latents = analysis::latent_means(pipeline.spvae, training);
    const Eigen::VectorXd base = latents.colwise().mean().transpose();
    const std::size_t vae_modes = std::min(a.modes, pipeline.spvae.config().latent_dim);
    for (std::size_t r = 0; r < vae_modes; ++r)
      write_sweep(stage, manifest, analysis::vae_mode_sweep(pipeline.spvae, latents, r, a.k_sigmas, base), "vae_rank",
                  "vae", r + 1, "latent_std");
  }
  stage.write("sweeps.json", manifest.dump(2) + "\n");
  Snapshot s;
  s.add("command", std::string("analyze"));
  s.add("correspondence_dir", a.correspondence_dir);
  s.add("test_correspondence_dir", a.test_correspondence_dir);
  s.add("model", a.model);
  s.add("modes", a.modes);
  std::string ks;
  for (double k : a.k_sigmas) ks += (ks.empty() ? "" : ",") + format_k(k);
  s.add("k_sigmas", ks);
  s.add("specificity_samples", a.specificity_samples);
  s.add("seed", a.seed);
  stage.write("config.txt", s.text());
  stage.commit();
  std::printf("PCA rank %zu; compactness(1) = %.4f\n", model.rank(), compact.empty() ? 0.0 : compact[0]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correspondence-based statistical shape models learned from surface meshes"};
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate box-with-moving-bump meshes");
  synth_cmd->add_option("--count", synth.count, "Number of meshes")->capture_default_str();
  synth_cmd->add_option("--t_min", synth.t_min, "Bump position parameter at the first mesh")->capture_default_str();
  synth_cmd->add_option("--t_max", synth.t_max, "Bump position parameter at the last mesh")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed for vertex noise")->capture_default_str();
  synth_cmd->add_option("--length", synth.params.length)->capture_default_str();
  synth_cmd->add_option("--width", synth.params.width)->capture_default_str();
  synth_cmd->add_option("--height", synth.params.height)->capture_default_str();
  synth_cmd->add_option("--resolution", synth.params.resolution, "Grid cells along the box length")->capture_default_str();
  synth_cmd->add_option("--bump_height", synth.params.bump_height)->capture_default_str();
  synth_cmd->add_option("--bump_sigma", synth.params.bump_sigma)->capture_default_str();
  synth_cmd->add_option("--bump_x_min", synth.params.bump_x_min)->capture_default_str();
  synth_cmd->add_option("--bump_x_max", synth.params.bump_x_max)->capture_default_str();
  synth_cmd->add_option("--noise", synth.params.noise, "Per-vertex Gaussian jitter")->capture_default_str();
  synth_cmd->add_option("--out_dir", synth.out_dir)->required();

  TemplateArgs tmpl;
  auto* template_cmd = app.add_subcommand("template", "Build an initial template point set");
  template_cmd->add_option("--mode", tmpl.mode, "sphere | medoid | sample-mesh")->capture_default_str();
  template_cmd->add_option("--data_dir", tmpl.data_dir, "Meshes for medoid mode");
  template_cmd->add_option("--mesh", tmpl.mesh, "Mesh for sample-mesh mode");
  template_cmd->add_option("--points", tmpl.points, "Template point count")->capture_default_str();
  template_cmd->add_option("--radius", tmpl.radius, "Sphere radius")->capture_default_str();
  template_cmd->add_option("--seed", tmpl.seed, "Surface sampling seed")->capture_default_str();
  template_cmd->add_option("--out_dir", tmpl.out_dir)->required();

  TrainArgs trainargs;
  auto* train_cmd = app.add_subcommand("train", "Train the correspondence and analysis networks");
  train_cmd->add_option("--data_dir", trainargs.data_dir, "Training meshes (*.obj)")->required();
  train_cmd->add_option("--validation_dir", trainargs.validation_dir, "Validation meshes for model selection");
  train_cmd->add_option("--template", trainargs.template_path, "Initial template point file");
  train_cmd->add_option("--config", trainargs.config_path, "key = value config file");
  train_cmd->add_option("--resume", trainargs.resume, "Checkpoint to continue from");
  train_cmd->add_option("--checkpoint_every", trainargs.checkpoint_every, "Epochs between checkpoints (0: end only)");
  train_cmd->add_option("--log_every", trainargs.log_every, "Epochs between progress lines")->capture_default_str();
  train_cmd->add_option("--out_dir", trainargs.out_dir)->required();
  const train::TrainConfig defaults;
  for (const auto& key : train::TrainConfig::keys()) {
    train_cmd->add_option_function<std::string>(
        "--" + key, [&trainargs, key](const std::string& v) { trainargs.overrides[key] = v; },
        "default: " + defaults.get(key));
  }

  InferArgs inferargs;
  auto* infer_cmd = app.add_subcommand("infer", "Predict correspondences for meshes");
  infer_cmd->add_option("--model", inferargs.model, "model.ckpt from train")->required();
  infer_cmd->add_option("--data_dir", inferargs.data_dir)->required();
  infer_cmd->add_option("--seed", inferargs.seed, "Seed for vertex padding")->capture_default_str();
  infer_cmd->add_option("--out_dir", inferargs.out_dir)->required();

  EvaluateArgs evalargs;
  auto* eval_cmd = app.add_subcommand("evaluate", "Distance metrics of predicted correspondences");
  auto* eval_source = eval_cmd->add_option_group("source", "Exactly one of");
  eval_source->add_option("--model", evalargs.model, "model.ckpt from train");
  eval_source->add_option("--correspondence_dir", evalargs.correspondence_dir, "Saved correspondences instead of a model");
  eval_source->require_option(1);
  eval_cmd->add_option("--data_dir", evalargs.data_dir)->required();
  eval_cmd->add_option("--seed", evalargs.seed, "Seed for vertex padding")->capture_default_str();
  eval_cmd->add_option("--out_dir", evalargs.out_dir)->required();

  AnalyzeArgs analyzeargs;
  auto* analyze_cmd = app.add_subcommand("analyze", "Shape statistics and modes of variation");
  analyze_cmd->add_option("--correspondence_dir", analyzeargs.correspondence_dir, "Training correspondences")->required();
  analyze_cmd->add_option("--test_correspondence_dir", analyzeargs.test_correspondence_dir,
                          "Held-out correspondences for generalization");
  analyze_cmd->add_option("--model", analyzeargs.model, "model.ckpt for SP-VAE modes");
  analyze_cmd->add_option("--modes", analyzeargs.modes, "Modes to sweep")->capture_default_str();
  analyze_cmd->add_option("--k_sigmas", analyzeargs.k_sigmas, "Sweep positions in standard deviations")
      ->delimiter(',')
      ->capture_default_str();
  analyze_cmd->add_option("--specificity_samples", analyzeargs.specificity_samples)->capture_default_str();
  analyze_cmd->add_option("--seed", analyzeargs.seed)->capture_default_str();
  analyze_cmd->add_option("--out_dir", analyzeargs.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) run_synth(synth);
    if (*template_cmd) run_template(tmpl);
    if (*train_cmd) run_train(trainargs);
    if (*infer_cmd) run_infer(inferargs);
    if (*eval_cmd) run_evaluate(evalargs);
    if (*analyze_cmd) run_analyze(analyzeargs);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
