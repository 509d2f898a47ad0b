#ifndef ASYMGAN_NETS_HPP
#define ASYMGAN_NETS_HPP

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asymgan/common.hpp"
#include "asymgan/rng.hpp"

namespace asymgan {

struct NetConfig {
  std::int64_t image_size = 128;
  std::int64_t base_channels = 64;
  std::int64_t in_channels = 3;
  std::int64_t out_channels = 3;
  std::int64_t n_res_blocks = 6;
  double norm_epsilon = 1e-5;

  void validate() const;
};

enum class ZKind { spatial, vector };

struct ZForm {
  ZKind kind = ZKind::spatial;
  std::int64_t channels = 8;  // spatial code channels
  std::int64_t dim = 8;       // vector code length

  static ZForm spatial(const NetConfig& cfg);
  static ZForm vector8();

  std::int64_t grid(std::int64_t image_size) const { return image_size / 8; }
  std::vector<std::int64_t> batch_shape(std::int64_t batch,
                                        std::int64_t image_size) const;
};

enum class ZInjection { concat_mid, concat_all_decoder, cin };

std::string to_string(ZInjection inj);
ZInjection injection_from_string(const std::string& s);
bool compatible(const ZForm& zform, ZInjection inj);
ZForm zform_for(ZInjection inj, const NetConfig& cfg);

// One pipeline stage as planned at construction time; doubles as the source
// for receptive-field arithmetic and the topology regression tests.
struct LayerPlan {
  std::string name;
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t kernel = 0;
  std::int64_t stride = 1;
  bool transposed = false;
};

std::int64_t receptive_field(const std::vector<LayerPlan>& plan);

// -------------------------------------------------------------------------
// Residual block with optional conditional instance normalization. The CIN
// projections start as the exact identity (gamma = 1, beta = 0) so an
// unmodulated network with the same conv weights produces bit-identical
// output.
// -------------------------------------------------------------------------
struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(std::int64_t channels, double eps, bool modulated,
               std::int64_t z_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor* z);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::InstanceNorm2d norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear gamma1{nullptr}, beta1{nullptr};
  torch::nn::Linear gamma2{nullptr}, beta2{nullptr};
  bool modulated = false;
};
TORCH_MODULE(ResBlock);

// -------------------------------------------------------------------------
// ResNet translator used for both G (no injection) and F (one of the three
// z-injection mechanisms). 2 stride-2 downsamplings, n residual blocks,
// 2 fractional-stride upsamplings, tanh output. Reflection padding
// throughout; inputs whose sides are not multiples of 4 are reflection-padded
// up and the output is cropped back, so the network is usable on the crop and
// scale probes.
// -------------------------------------------------------------------------
struct GeneratorImpl : torch::nn::Module {
  GeneratorImpl(const NetConfig& cfg, std::optional<ZForm> zform,
                std::optional<ZInjection> injection);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& z);

  bool takes_z() const { return injection.has_value(); }
  std::int64_t n_modulated_blocks() const;
  std::int64_t mid_inject_after() const;  // 1-based block index, concat_mid

  NetConfig cfg;
  std::optional<ZForm> zform;
  std::optional<ZInjection> injection;
  std::vector<LayerPlan> plan;

  torch::nn::Conv2d stem{nullptr};
  torch::nn::InstanceNorm2d stem_norm{nullptr};
  torch::nn::Conv2d down1{nullptr}, down2{nullptr};
  torch::nn::InstanceNorm2d down1_norm{nullptr}, down2_norm{nullptr};
  std::vector<ResBlock> blocks;
  torch::nn::Conv2d fuse{nullptr};  // concat_mid only
  torch::nn::InstanceNorm2d fuse_norm{nullptr};
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr};
  torch::nn::InstanceNorm2d up1_norm{nullptr}, up2_norm{nullptr};
  torch::nn::Conv2d head{nullptr};

 private:
  torch::Tensor run(const torch::Tensor& x, const torch::Tensor* z);
};
TORCH_MODULE(Generator);

// 3 stride-2 convolutions + 3 residual blocks; spatial form emits the
// zf.channels x H/8 x W/8 code grid, vector form appends global average
// pooling and a projection to an 8-vector.
struct EncoderImpl : torch::nn::Module {
  EncoderImpl(const NetConfig& cfg, const ZForm& zform);
  torch::Tensor forward(const torch::Tensor& x);

  NetConfig cfg;
  ZForm zform;
  std::vector<LayerPlan> plan;

  torch::nn::Conv2d stem{nullptr};
  torch::nn::InstanceNorm2d stem_norm{nullptr};
  torch::nn::Conv2d down1{nullptr}, down2{nullptr}, down3{nullptr};
  torch::nn::InstanceNorm2d down1_norm{nullptr}, down2_norm{nullptr},
      down3_norm{nullptr};
  std::vector<ResBlock> blocks;
  torch::nn::Conv2d code_head{nullptr};
  torch::nn::Linear proj{nullptr};  // vector form only
};
TORCH_MODULE(Encoder);

// 70x70 PatchGAN.
struct PatchDiscriminatorImpl : torch::nn::Module {
  explicit PatchDiscriminatorImpl(const NetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);

  /// Receptive field of one output cell, in input pixels (= 70).
  std::int64_t receptive_field_pixels() const;
  /// Input-pixel distance between adjacent output cells (= 8).
  std::int64_t output_stride() const;

  std::vector<LayerPlan> plan;
  std::vector<torch::nn::Conv2d> convs;
  std::vector<torch::nn::InstanceNorm2d> norms;
};
TORCH_MODULE(PatchDiscriminator);

// Discriminator over codes: small conv patch scorer on the spatial code grid
// (3-cell = 24-pixel receptive field in code-upsampled coordinates), or a
// 8 -> 64 -> 64 -> 1 fully-connected scorer for vector codes.
struct CodeDiscriminatorImpl : torch::nn::Module {
  CodeDiscriminatorImpl(const NetConfig& cfg, const ZForm& zform);
  torch::Tensor forward(const torch::Tensor& z);

  std::int64_t receptive_field_pixels() const;  // spatial form

  ZForm zform;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Linear fc1{nullptr}, fc2{nullptr}, fc3{nullptr};
};
TORCH_MODULE(CodeDiscriminator);

// Fixed, deterministically seeded convolutional feature stack standing in for
// the pre-trained perception network. Four stride-2 conv+ReLU layers; weights
// are frozen and identical in every process.
struct FeatureStackImpl : torch::nn::Module {
  FeatureStackImpl();
  torch::Tensor forward_to(const torch::Tensor& x, std::int64_t layer_j);

  std::vector<torch::nn::Conv2d> convs;
};
TORCH_MODULE(FeatureStack);

/// phi_j(x) from the process-wide fixed feature stack (layer_j in 1..4).
torch::Tensor feature_extractor(const torch::Tensor& image,
                                std::int64_t layer_j);
/// Replace the fixed stack's weights from a checkpoint-format file.
void load_feature_extractor_weights(const std::string& path);
FeatureStack shared_feature_stack();

// -------------------------------------------------------------------------
// Bundle of every network a mode needs, plus introspection helpers.
// -------------------------------------------------------------------------
struct ModelBundle {
  Mode mode = Mode::asym_no_ext;
  NetConfig cfg;
  ZForm zform;
  ZInjection injection = ZInjection::concat_mid;

  Generator g{nullptr};
  Generator f{nullptr};
  Encoder e{nullptr};
  PatchDiscriminator d_x{nullptr}, d_y{nullptr};
  CodeDiscriminator d_z{nullptr};

  bool has_aux() const { return mode != Mode::baseline_cyclegan; }

  std::vector<torch::Tensor> generator_parameters() const;
  std::vector<torch::Tensor> discriminator_parameters() const;
  /// Stable "model/<net>/<param>" naming, checkpoint order.
  std::vector<std::pair<std::string, torch::Tensor>> named_tensors() const;

  void to_dtype(torch::Dtype dtype);
  void set_discriminator_requires_grad(bool enabled);
  void train_mode(bool on);
};

ModelBundle build_bundle(Mode mode, const NetConfig& cfg, ZInjection injection,
                         std::uint64_t master_seed);

Generator build_generator_g(const NetConfig& cfg);
Generator build_generator_f(const NetConfig& cfg, const ZForm& zform,
                            ZInjection injection);
Encoder build_encoder(const NetConfig& cfg, const ZForm& zform);
PatchDiscriminator build_patch_discriminator(const NetConfig& cfg);
CodeDiscriminator build_code_discriminator(const NetConfig& cfg,
                                           const ZForm& zform);

/// Gaussian(0, 0.02) conv/linear weights, zero biases, identity-start CIN
/// projections, drawn from the given stream in registration order.
void init_parameters(torch::nn::Module& module, Rng rng);

std::int64_t param_count(const torch::nn::Module& module);
bool all_parameters_finite(const torch::nn::Module& module);

/// z ~ N(0, I) in the bundle's code shape.
torch::Tensor sample_z(const ZForm& zform, std::int64_t batch,
                       std::int64_t image_size, Rng& rng,
                       torch::Dtype dtype = torch::kF32);

}  // namespace asymgan

#endif
