#ifndef ASYMGAN_TRAIN_HPP
#define ASYMGAN_TRAIN_HPP

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/checkpoint.hpp"
#include "asymgan/data.hpp"
#include "asymgan/losses.hpp"
#include "asymgan/nets.hpp"
#include "asymgan/optim.hpp"

namespace asymgan {

struct TrainConfig {
  Mode mode = Mode::asym_ext;
  ZInjection z_injection = ZInjection::cin;
  LossWeights weights = LossWeights::for_mode(Mode::asym_ext);
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  std::int64_t epochs_flat = 100;
  std::int64_t epochs_decay = 100;
  std::int64_t batch_size = 1;
  std::int64_t pool_size = 50;
  std::uint64_t seed = 0;
  bool disable_adv_ext = false;
  bool disable_perception = false;
  bool disable_tv = false;

  // Network width/depth knobs (image size always comes from the dataset).
  std::int64_t base_channels = 64;
  std::int64_t n_res_blocks = 6;

  std::int64_t checkpoint_every = 500;
  std::int64_t max_steps = 0;  // 0 = run the full schedule

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::ordered_json& j);
  ExtOptions ext_options() const;
};

/// Flat learning rate for epochs_flat epochs, then linear decay to zero over
/// epochs_decay (the first decay epoch still runs at the full rate).
std::pair<double, double> lr_at(std::int64_t epoch, const TrainConfig& config);

/// History buffer of generated images for discriminator updates. Until full it
/// stores and returns the input; afterwards each query returns the input with
/// probability 0.5 and otherwise swaps it against a uniformly chosen entry.
class ImagePool {
 public:
  explicit ImagePool(std::int64_t capacity) : capacity_(capacity) {}

  /// Per-sample decisions along the batch dimension.
  torch::Tensor query(const torch::Tensor& fakes, Rng& rng);

  std::int64_t size() const { return static_cast<std::int64_t>(buffer_.size()); }
  std::int64_t capacity() const { return capacity_; }
  const std::vector<torch::Tensor>& buffer() const { return buffer_; }
  void restore(std::vector<torch::Tensor> buffer);

 private:
  std::int64_t capacity_;
  std::vector<torch::Tensor> buffer_;
};

torch::Tensor pool_query(ImagePool& pool, const torch::Tensor& fake, Rng& rng);

/// Everything one training run owns.
struct Trainer {
  TrainConfig cfg;
  std::int64_t image_size = 0;
  ModelBundle bundle;
  Adam opt_g;
  Adam opt_d;
  ImagePool pool_x;
  ImagePool pool_y;
  std::int64_t step = 0;

  static Trainer create(const TrainConfig& cfg, std::int64_t image_size);
  static Trainer restore(const std::filesystem::path& checkpoint_path);

  /// One generator-side update followed by one discriminator-side update;
  /// returns the loss breakdown evaluated before the updates.
  LossBreakdown train_step(const Batch& batch, double lr_g, double lr_d);

  void save_checkpoint(const std::filesystem::path& path,
                       std::int64_t epoch) const;
};

Trainer load_checkpoint(const std::filesystem::path& path);

struct CheckpointSeries {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
};

/// Full alternating optimization with the paper's schedule. Writes
/// losses.csv (`step,epoch,term,value`), periodic checkpoints, and a final
/// checkpoint into out_dir. On a non-finite loss a diagnostic checkpoint is
/// written and numeric_error is rethrown.
CheckpointSeries train(const TrainConfig& config,
                       const DatasetManifest& manifest,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume =
                           std::nullopt);

}  // namespace asymgan

#endif
