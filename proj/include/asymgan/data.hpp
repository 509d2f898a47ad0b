#ifndef ASYMGAN_DATA_HPP
#define ASYMGAN_DATA_HPP

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asymgan/common.hpp"
#include "asymgan/losses.hpp"

namespace asymgan {

/// Per-pixel class index grid, kLong HxW.
using ClassMap = torch::Tensor;

using Rgb = std::array<std::uint8_t, 3>;
using StyleVec = std::array<double, 3>;  // hue shift, lighting gain, phase

struct SceneSpec {
  std::int64_t image_size = 64;
  std::int64_t n_classes = 5;
  std::vector<Rgb> palette;  // label colors, pairwise well separated
  std::int64_t texture_octaves = 3;
  std::int64_t style_dims = 3;

  static SceneSpec defaults(std::int64_t image_size = 64,
                            std::int64_t n_classes = 5);
  void validate() const;
};

struct Scene {
  torch::Tensor label;  // 3xHxW in [-1,1], exact palette colors
  torch::Tensor photo;  // 3xHxW in [-1,1], textured, style-modulated
  ClassMap class_map;
  StyleVec style;
};

/// Deterministic scene synthesis: the class layout depends only on the seed,
/// the photo additionally on the style vector (drawn from the seed when not
/// supplied). The hidden style factor makes label -> photo one-to-many.
Scene gen_scene(std::uint64_t seed, const SceneSpec& spec,
                std::optional<StyleVec> style = std::nullopt);

struct ValEntry {
  std::string label, photo, class_map;
  std::uint64_t scene_seed = 0;
};

struct TrainEntry {
  std::string file;
  std::uint64_t scene_seed = 0;
};

struct DatasetManifest {
  std::filesystem::path root_path;  // directory holding manifest.json
  SceneSpec spec;
  std::int64_t n_train_x = 0, n_train_y = 0, n_val_pairs = 0;
  std::uint64_t master_seed = 0;
  std::vector<TrainEntry> train_x;  // photos (information-rich domain)
  std::vector<TrainEntry> train_y;  // labels (information-poor domain)
  std::vector<ValEntry> val;

  void save(const std::filesystem::path& manifest_path) const;
  static DatasetManifest load(const std::filesystem::path& manifest_path);
};

struct DatasetCounts {
  std::int64_t n_train_x = 200;
  std::int64_t n_train_y = 200;
  std::int64_t n_val_pairs = 32;
};

DatasetManifest make_dataset(const SceneSpec& spec, const DatasetCounts& counts,
                             std::uint64_t master_seed,
                             const std::filesystem::path& out_dir);

/// Image loader with an in-memory decode cache.
class Dataset {
 public:
  explicit Dataset(DatasetManifest manifest);

  const DatasetManifest& manifest() const { return manifest_; }
  std::int64_t n_train_x() const;
  std::int64_t n_train_y() const;
  std::int64_t n_val() const;

  torch::Tensor train_x_photo(std::int64_t i) const;
  torch::Tensor train_y_label(std::int64_t i) const;
  torch::Tensor val_label(std::int64_t i) const;
  torch::Tensor val_photo(std::int64_t i) const;
  ClassMap val_class_map(std::int64_t i) const;

 private:
  torch::Tensor cached(const std::string& rel) const;

  DatasetManifest manifest_;
  mutable std::map<std::string, torch::Tensor> cache_;
};

/// Independent without-replacement shuffles per domain, reshuffled per epoch;
/// pure function of (split_seed, step).
Batch unpaired_batch(const Dataset& dataset, std::uint64_t split_seed,
                     std::int64_t step, std::int64_t batch_size);

std::int64_t steps_per_epoch(const Dataset& dataset, std::int64_t batch_size);

/// Nearest palette color per pixel; ties break to the lowest class index.
ClassMap to_class_map(const torch::Tensor& label_image,
                      const std::vector<Rgb>& palette);

torch::Tensor palette_color(const Rgb& rgb);  // 3-vector in [-1,1]

}  // namespace asymgan

#endif
