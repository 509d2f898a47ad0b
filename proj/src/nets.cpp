#include "asymgan/nets.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "asymgan/checkpoint.hpp"

namespace asymgan {

namespace F = torch::nn::functional;

namespace {

constexpr std::uint64_t kPhiSeed = 0x8589F1A2C3D4E5F6ULL;

torch::Tensor reflect_pad(const torch::Tensor& x, std::int64_t p) {
  return F::pad(x, F::PadFuncOptions({p, p, p, p}).mode(torch::kReflect));
}

torch::nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t k,
                            std::int64_t stride = 1, std::int64_t pad = 0) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

torch::nn::InstanceNorm2d make_norm(std::int64_t ch, double eps) {
  return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(ch).eps(eps));
}

std::int64_t ceil_to(std::int64_t v, std::int64_t m) {
  return (v + m - 1) / m * m;
}

}  // namespace

void NetConfig::validate() const {
  if (image_size < 8 || image_size % 4 != 0) {
    throw config_error("image_size must be >= 8 and divisible by 4");
  }
  if (base_channels < 4) throw config_error("base_channels must be >= 4");
  if (n_res_blocks < 1) throw config_error("n_res_blocks must be >= 1");
  if (in_channels < 1 || out_channels < 1) {
    throw config_error("channel counts must be positive");
  }
  if (norm_epsilon <= 0) throw config_error("norm_epsilon must be positive");
}

ZForm ZForm::spatial(const NetConfig& cfg) {
  if (cfg.image_size % 8 != 0) {
    throw config_error("spatial z requires image_size divisible by 8");
  }
  ZForm z;
  z.kind = ZKind::spatial;
  z.channels = 8;
  return z;
}

ZForm ZForm::vector8() {
  ZForm z;
  z.kind = ZKind::vector;
  z.dim = 8;
  return z;
}

std::vector<std::int64_t> ZForm::batch_shape(std::int64_t batch,
                                             std::int64_t image_size) const {
  if (kind == ZKind::spatial) {
    return {batch, channels, grid(image_size), grid(image_size)};
  }
  return {batch, dim};
}

std::string to_string(ZInjection inj) {
  switch (inj) {
    case ZInjection::concat_mid: return "concat-mid";
    case ZInjection::concat_all_decoder: return "concat-all";
    case ZInjection::cin: return "cin";
  }
  throw config_error("unknown injection");
}

ZInjection injection_from_string(const std::string& s) {
  if (s == "concat-mid") return ZInjection::concat_mid;
  if (s == "concat-all") return ZInjection::concat_all_decoder;
  if (s == "cin") return ZInjection::cin;
  throw config_error("unknown z-injection: " + s);
}

bool compatible(const ZForm& zform, ZInjection inj) {
  if (inj == ZInjection::concat_mid) return zform.kind == ZKind::spatial;
  return zform.kind == ZKind::vector;
}

ZForm zform_for(ZInjection inj, const NetConfig& cfg) {
  return inj == ZInjection::concat_mid ? ZForm::spatial(cfg) : ZForm::vector8();
}

std::int64_t receptive_field(const std::vector<LayerPlan>& plan) {
  std::int64_t rf = 1, jump = 1;
  for (const auto& l : plan) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

ResBlockImpl::ResBlockImpl(std::int64_t channels, double eps, bool mod,
                           std::int64_t z_dim)
    : modulated(mod) {
  conv1 = register_module("conv1", make_conv(channels, channels, 3));
  norm1 = register_module("norm1", make_norm(channels, eps));
  if (modulated) {
    gamma1 = register_module("gamma1", torch::nn::Linear(z_dim, channels));
    beta1 = register_module("beta1", torch::nn::Linear(z_dim, channels));
  }
  conv2 = register_module("conv2", make_conv(channels, channels, 3));
  norm2 = register_module("norm2", make_norm(channels, eps));
  if (modulated) {
    gamma2 = register_module("gamma2", torch::nn::Linear(z_dim, channels));
    beta2 = register_module("beta2", torch::nn::Linear(z_dim, channels));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x,
                                    const torch::Tensor* z) {
  if (modulated && z == nullptr) {
    throw shape_error("modulated residual block requires a code");
  }
  auto modulate = [&](torch::Tensor h, torch::nn::Linear& gamma,
                      torch::nn::Linear& beta) {
    const std::int64_t b = h.size(0), c = h.size(1);
    auto g = gamma(*z).view({b, c, 1, 1});
    auto bb = beta(*z).view({b, c, 1, 1});
    return h * g + bb;
  };
  auto h = norm1(conv1(reflect_pad(x, 1)));
  if (modulated) h = modulate(h, gamma1, beta1);
  h = torch::relu(h);
  h = norm2(conv2(reflect_pad(h, 1)));
  if (modulated) h = modulate(h, gamma2, beta2);
  return x + h;
}

// ---------------------------------------------------------------------------
// Generator (G and F)
// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(const NetConfig& config, std::optional<ZForm> zf,
                             std::optional<ZInjection> inj)
    : cfg(config), zform(zf), injection(inj) {
  cfg.validate();
  if (injection.has_value()) {
    if (!zform.has_value() || !compatible(*zform, *injection)) {
      throw config_error("z form incompatible with injection mode");
    }
  }
  const std::int64_t c = cfg.base_channels;
  const bool cat_all = injection == ZInjection::concat_all_decoder;
  const std::int64_t zdim = cat_all ? zform->dim : 0;

  auto add_plan = [&](const std::string& name, std::int64_t in,
                      std::int64_t out, std::int64_t k, std::int64_t s,
                      bool transposed = false) {
    plan.push_back({name, in, out, k, s, transposed});
  };

  stem = register_module("stem", make_conv(cfg.in_channels, c, 7));
  stem_norm = register_module("stem_norm", make_norm(c, cfg.norm_epsilon));
  add_plan("stem", cfg.in_channels, c, 7, 1);
  down1 = register_module("down1", make_conv(c, 2 * c, 3, 2));
  down1_norm = register_module("down1_norm", make_norm(2 * c, cfg.norm_epsilon));
  add_plan("down", c, 2 * c, 3, 2);
  down2 = register_module("down2", make_conv(2 * c, 4 * c, 3, 2));
  down2_norm = register_module("down2_norm", make_norm(4 * c, cfg.norm_epsilon));
  add_plan("down", 2 * c, 4 * c, 3, 2);

  const std::int64_t n_mod = n_modulated_blocks();
  const std::int64_t mod_first =
      cfg.n_res_blocks >= 3 ? (cfg.n_res_blocks - 3) / 2 + 1 : 1;
  for (std::int64_t i = 1; i <= cfg.n_res_blocks; ++i) {
    const bool mod = injection == ZInjection::cin && i >= mod_first &&
                     i < mod_first + n_mod;
    auto block = ResBlock(4 * c, cfg.norm_epsilon, mod, mod ? zform->dim : 8);
    blocks.push_back(register_module("block" + std::to_string(i), block));
    add_plan("res", 4 * c, 4 * c, 3, 1);
  }
  if (injection == ZInjection::concat_mid) {
    fuse = register_module("fuse", make_conv(4 * c + zform->channels, 4 * c, 3));
    fuse_norm = register_module("fuse_norm", make_norm(4 * c, cfg.norm_epsilon));
    add_plan("fuse", 4 * c + zform->channels, 4 * c, 3, 1);
  }

  up1 = register_module(
      "up1", torch::nn::ConvTranspose2d(
                 torch::nn::ConvTranspose2dOptions(4 * c + zdim, 2 * c, 3)
                     .stride(2)
                     .padding(1)
                     .output_padding(1)));
  up1_norm = register_module("up1_norm", make_norm(2 * c, cfg.norm_epsilon));
  add_plan("up", 4 * c + zdim, 2 * c, 3, 2, true);
  up2 = register_module(
      "up2", torch::nn::ConvTranspose2d(
                 torch::nn::ConvTranspose2dOptions(2 * c + zdim, c, 3)
                     .stride(2)
                     .padding(1)
                     .output_padding(1)));
  up2_norm = register_module("up2_norm", make_norm(c, cfg.norm_epsilon));
  add_plan("up", 2 * c + zdim, c, 3, 2, true);
  head = register_module("head", make_conv(c + zdim, cfg.out_channels, 7));
  add_plan("head", c + zdim, cfg.out_channels, 7, 1);
}

std::int64_t GeneratorImpl::n_modulated_blocks() const {
  if (injection != ZInjection::cin) return 0;
  return std::min<std::int64_t>(3, cfg.n_res_blocks);
}

std::int64_t GeneratorImpl::mid_inject_after() const {
  return std::min<std::int64_t>(3, cfg.n_res_blocks);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  if (takes_z()) throw shape_error("this generator requires a code input");
  return run(x, nullptr);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x,
                                     const torch::Tensor& z) {
  if (!takes_z()) throw shape_error("this generator takes no code input");
  return run(x, &z);
}

torch::Tensor GeneratorImpl::run(const torch::Tensor& input,
                                 const torch::Tensor* z) {
  TORCH_CHECK(input.dim() == 4, "generator expects BxCxHxW input");
  if (input.size(1) != cfg.in_channels) {
    throw shape_error("generator input channel mismatch");
  }
  const std::int64_t h0 = input.size(2), w0 = input.size(3);
  TORCH_CHECK(h0 >= 4 && w0 >= 4, "generator input too small");
  if (z != nullptr) {
    if (zform->kind == ZKind::vector) {
      if (z->dim() != 2 || z->size(1) != zform->dim ||
          z->size(0) != input.size(0)) {
        throw shape_error("vector code must be Bx" +
                          std::to_string(zform->dim));
      }
    } else {
      if (z->dim() != 4 || z->size(1) != zform->channels ||
          z->size(0) != input.size(0)) {
        throw shape_error("spatial code must be BxCxhxw with C=" +
                          std::to_string(zform->channels));
      }
    }
  }

  // Sides that are not multiples of 4 are reflection-padded up and cropped
  // back after the decoder, keeping the network usable on probe-cropped and
  // rescaled inputs.
  const std::int64_t hp = ceil_to(h0, 4), wp = ceil_to(w0, 4);
  auto x = input;
  if (hp != h0 || wp != w0) {
    x = F::pad(x, F::PadFuncOptions({0, wp - w0, 0, hp - h0})
                      .mode(torch::kReflect));
  }

  auto h = torch::relu(stem_norm(stem(reflect_pad(x, 3))));
  h = torch::relu(down1_norm(down1(reflect_pad(h, 1))));
  h = torch::relu(down2_norm(down2(reflect_pad(h, 1))));

  const bool cat_all = injection == ZInjection::concat_all_decoder;
  auto with_code_planes = [&](const torch::Tensor& t) {
    auto zb = z->view({t.size(0), zform->dim, 1, 1})
                  .expand({t.size(0), zform->dim, t.size(2), t.size(3)});
    return torch::cat({t, zb}, 1);
  };

  const std::int64_t inject_after = mid_inject_after();
  for (std::int64_t i = 0; i < cfg.n_res_blocks; ++i) {
    auto& block = blocks[static_cast<std::size_t>(i)];
    h = block->forward(h, block->modulated ? z : nullptr);
    if (injection == ZInjection::concat_mid && i + 1 == inject_after) {
      auto zz = F::interpolate(
          *z, F::InterpolateFuncOptions()
                  .size(std::vector<std::int64_t>{h.size(2), h.size(3)})
                  .mode(torch::kNearest));
      h = torch::cat({h, zz}, 1);
      h = torch::relu(fuse_norm(fuse(reflect_pad(h, 1))));
    }
  }

  if (cat_all) h = with_code_planes(h);
  h = torch::relu(up1_norm(up1(h)));
  if (cat_all) h = with_code_planes(h);
  h = torch::relu(up2_norm(up2(h)));
  if (cat_all) h = with_code_planes(h);
  auto y = torch::tanh(head(reflect_pad(h, 3)));

  if (hp != h0 || wp != w0) y = y.slice(2, 0, h0).slice(3, 0, w0);
  return y;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

EncoderImpl::EncoderImpl(const NetConfig& config, const ZForm& zf)
    : cfg(config), zform(zf) {
  cfg.validate();
  const std::int64_t c = cfg.base_channels;
  stem = register_module("stem", make_conv(cfg.in_channels, c, 7));
  stem_norm = register_module("stem_norm", make_norm(c, cfg.norm_epsilon));
  plan.push_back({"stem", cfg.in_channels, c, 7, 1, false});
  down1 = register_module("down1", make_conv(c, 2 * c, 3, 2));
  down1_norm = register_module("down1_norm", make_norm(2 * c, cfg.norm_epsilon));
  plan.push_back({"down", c, 2 * c, 3, 2, false});
  down2 = register_module("down2", make_conv(2 * c, 4 * c, 3, 2));
  down2_norm = register_module("down2_norm", make_norm(4 * c, cfg.norm_epsilon));
  plan.push_back({"down", 2 * c, 4 * c, 3, 2, false});
  down3 = register_module("down3", make_conv(4 * c, 4 * c, 3, 2));
  down3_norm = register_module("down3_norm", make_norm(4 * c, cfg.norm_epsilon));
  plan.push_back({"down", 4 * c, 4 * c, 3, 2, false});
  for (std::int64_t i = 1; i <= 3; ++i) {
    auto block = ResBlock(4 * c, cfg.norm_epsilon, false, 8);
    blocks.push_back(register_module("block" + std::to_string(i), block));
    plan.push_back({"res", 4 * c, 4 * c, 3, 1, false});
  }
  code_head = register_module("code_head", make_conv(4 * c, zform.channels, 1));
  plan.push_back({"code_head", 4 * c, zform.channels, 1, 1, false});
  if (zform.kind == ZKind::vector) {
    proj = register_module("proj", torch::nn::Linear(zform.channels, zform.dim));
  }
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& input) {
  TORCH_CHECK(input.dim() == 4, "encoder expects BxCxHxW input");
  if (input.size(1) != cfg.in_channels) {
    throw shape_error("encoder input channel mismatch");
  }
  const std::int64_t h0 = input.size(2), w0 = input.size(3);
  const std::int64_t hp = ceil_to(h0, 8), wp = ceil_to(w0, 8);
  auto x = input;
  if (hp != h0 || wp != w0) {
    x = F::pad(x, F::PadFuncOptions({0, wp - w0, 0, hp - h0})
                      .mode(torch::kReflect));
  }
  auto h = torch::relu(stem_norm(stem(reflect_pad(x, 3))));
  h = torch::relu(down1_norm(down1(reflect_pad(h, 1))));
  h = torch::relu(down2_norm(down2(reflect_pad(h, 1))));
  h = torch::relu(down3_norm(down3(reflect_pad(h, 1))));
  for (auto& block : blocks) h = block->forward(h, nullptr);
  auto code = code_head(h);
  if (zform.kind == ZKind::spatial) return code;
  return proj(code.mean({2, 3}));
}

// ---------------------------------------------------------------------------
// PatchGAN discriminator
// ---------------------------------------------------------------------------

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const NetConfig& cfg) {
  cfg.validate();
  const std::int64_t c = cfg.base_channels;
  // 3 stride-2 layers gives the 70x70 receptive field; very small inputs (the
  // shrunken gradient-check config) drop to 2 so the score map stays nonempty.
  std::int64_t n_downs = 3;
  while (n_downs > 1 && cfg.image_size / (1LL << n_downs) < 3) --n_downs;

  std::int64_t in = cfg.in_channels;
  for (std::int64_t i = 0; i < n_downs; ++i) {
    const std::int64_t out = c * std::min<std::int64_t>(1LL << i, 8);
    plan.push_back({"down", in, out, 4, 2, false});
    in = out;
  }
  const std::int64_t penult = c * std::min<std::int64_t>(1LL << n_downs, 8);
  plan.push_back({"penult", in, penult, 4, 1, false});
  plan.push_back({"score", penult, 1, 4, 1, false});

  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& l = plan[i];
    convs.push_back(register_module(
        "conv" + std::to_string(i + 1),
        make_conv(l.in_channels, l.out_channels, l.kernel, l.stride, 1)));
    // No normalization on the first layer or the score layer.
    if (i > 0 && i + 1 < plan.size()) {
      norms.push_back(register_module("norm" + std::to_string(i + 1),
                                      make_norm(l.out_channels,
                                                cfg.norm_epsilon)));
    }
  }
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  TORCH_CHECK(x.dim() == 4, "discriminator expects BxCxHxW input");
  auto h = x;
  std::size_t norm_idx = 0;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    h = convs[i](h);
    if (i + 1 == convs.size()) break;
    if (i > 0) h = norms[norm_idx++](h);
    h = torch::leaky_relu(h, 0.2);
  }
  return h;
}

std::int64_t PatchDiscriminatorImpl::receptive_field_pixels() const {
  return receptive_field(plan);
}

std::int64_t PatchDiscriminatorImpl::output_stride() const {
  std::int64_t s = 1;
  for (const auto& l : plan) s *= l.stride;
  return s;
}

// ---------------------------------------------------------------------------
// Code discriminator
// ---------------------------------------------------------------------------

CodeDiscriminatorImpl::CodeDiscriminatorImpl(const NetConfig& cfg,
                                             const ZForm& zf)
    : zform(zf) {
  cfg.validate();
  if (zform.kind == ZKind::spatial) {
    conv1 = register_module("conv1", make_conv(zform.channels, 64, 3, 1, 1));
    conv2 = register_module("conv2", make_conv(64, 64, 1));
    conv3 = register_module("conv3", make_conv(64, 1, 1));
  } else {
    fc1 = register_module("fc1", torch::nn::Linear(zform.dim, 64));
    fc2 = register_module("fc2", torch::nn::Linear(64, 64));
    fc3 = register_module("fc3", torch::nn::Linear(64, 1));
  }
}

torch::Tensor CodeDiscriminatorImpl::forward(const torch::Tensor& z) {
  if (zform.kind == ZKind::spatial) {
    if (z.dim() != 4 || z.size(1) != zform.channels) {
      throw shape_error("spatial code discriminator expects BxCxhxw codes");
    }
    auto h = torch::leaky_relu(conv1(z), 0.2);
    h = torch::leaky_relu(conv2(h), 0.2);
    return conv3(h);
  }
  if (z.dim() != 2 || z.size(1) != zform.dim) {
    throw shape_error("vector code discriminator expects Bxdim codes");
  }
  auto h = torch::leaky_relu(fc1(z), 0.2);
  h = torch::leaky_relu(fc2(h), 0.2);
  return fc3(h);
}

std::int64_t CodeDiscriminatorImpl::receptive_field_pixels() const {
  // One 3x3 conv on the 1/8-resolution code grid: 3 cells of 8 pixels.
  return 3 * 8;
}

// ---------------------------------------------------------------------------
// Fixed feature stack
// ---------------------------------------------------------------------------

FeatureStackImpl::FeatureStackImpl() {
  const std::int64_t chans[] = {3, 16, 32, 64, 128};
  Rng rng = Rng::stream(kPhiSeed, "phi");
  torch::NoGradGuard guard;
  for (int i = 0; i < 4; ++i) {
    auto conv = make_conv(chans[i], chans[i + 1], 3, 2, 1);
    const double fan_in = static_cast<double>(chans[i]) * 9.0;
    rng.fill_normal(conv->weight, 0.0, std::sqrt(2.0 / fan_in));
    conv->bias.zero_();
    convs.push_back(
        register_module("conv" + std::to_string(i + 1), conv));
  }
  for (auto& p : parameters()) p.set_requires_grad(false);
}

torch::Tensor FeatureStackImpl::forward_to(const torch::Tensor& x,
                                           std::int64_t layer_j) {
  if (layer_j < 1 || layer_j > 4) {
    throw config_error("feature layer index must be in 1..4");
  }
  auto h = x;
  for (std::int64_t i = 0; i < layer_j; ++i) {
    h = torch::relu(convs[static_cast<std::size_t>(i)](h));
  }
  return h;
}

namespace {

std::mutex g_phi_mutex;
std::map<torch::Dtype, FeatureStack> g_phi;

FeatureStack phi_for(torch::Dtype dtype) {
  std::lock_guard<std::mutex> lock(g_phi_mutex);
  auto it = g_phi.find(torch::kF32);
  if (it == g_phi.end()) {
    it = g_phi.emplace(torch::kF32, FeatureStack()).first;
  }
  if (dtype == torch::kF32) return it->second;
  auto jt = g_phi.find(dtype);
  if (jt == g_phi.end()) {
    FeatureStack copy;
    torch::NoGradGuard guard;
    auto src = it->second->named_parameters();
    for (auto& p : copy->named_parameters()) {
      p.value().copy_(src[p.key()]);
    }
    copy->to(dtype);
    for (auto& p : copy->parameters()) p.set_requires_grad(false);
    jt = g_phi.emplace(dtype, copy).first;
  }
  return jt->second;
}

}  // namespace

FeatureStack shared_feature_stack() { return phi_for(torch::kF32); }

torch::Tensor feature_extractor(const torch::Tensor& image,
                                std::int64_t layer_j) {
  return phi_for(image.scalar_type())->forward_to(image, layer_j);
}

void load_feature_extractor_weights(const std::string& path) {
  auto file = read_checkpoint(path);
  std::lock_guard<std::mutex> lock(g_phi_mutex);
  g_phi.clear();
  auto stack = FeatureStack();
  torch::NoGradGuard guard;
  for (auto& p : stack->named_parameters()) {
    auto it = file.tensors.find("phi/" + p.key());
    if (it == file.tensors.end()) {
      throw format_error("feature weights file missing tensor phi/" + p.key());
    }
    p.value().copy_(it->second);
  }
  for (auto& p : stack->parameters()) p.set_requires_grad(false);
  g_phi.emplace(torch::kF32, stack);
}

// ---------------------------------------------------------------------------
// Builders, init, bundle
// ---------------------------------------------------------------------------

Generator build_generator_g(const NetConfig& cfg) {
  return Generator(cfg, std::nullopt, std::nullopt);
}

Generator build_generator_f(const NetConfig& cfg, const ZForm& zform,
                            ZInjection injection) {
  if (!compatible(zform, injection)) {
    throw config_error("z form incompatible with injection mode");
  }
  return Generator(cfg, zform, injection);
}

Encoder build_encoder(const NetConfig& cfg, const ZForm& zform) {
  return Encoder(cfg, zform);
}

PatchDiscriminator build_patch_discriminator(const NetConfig& cfg) {
  return PatchDiscriminator(cfg);
}

CodeDiscriminator build_code_discriminator(const NetConfig& cfg,
                                           const ZForm& zform) {
  return CodeDiscriminator(cfg, zform);
}

void init_parameters(torch::nn::Module& module, Rng rng) {
  torch::NoGradGuard guard;
  for (auto& item : module.named_parameters()) {
    const std::string& name = item.key();
    torch::Tensor t = item.value();
    if (name.find("gamma") != std::string::npos) {
      if (name.ends_with("bias")) {
        t.fill_(1.0);
      } else {
        t.zero_();
      }
    } else if (name.find("beta") != std::string::npos) {
      t.zero_();
    } else if (t.dim() >= 2) {
      rng.fill_normal(t, 0.0, 0.02);
    } else {
      t.zero_();
    }
  }
}

std::int64_t param_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

bool all_parameters_finite(const torch::nn::Module& module) {
  for (const auto& p : module.parameters()) {
    if (!p.isfinite().all().item<bool>()) return false;
  }
  return true;
}

torch::Tensor sample_z(const ZForm& zform, std::int64_t batch,
                       std::int64_t image_size, Rng& rng, torch::Dtype dtype) {
  auto t = torch::empty(zform.batch_shape(batch, image_size),
                        torch::TensorOptions().dtype(dtype));
  rng.fill_normal(t);
  return t;
}

ModelBundle build_bundle(Mode mode, const NetConfig& cfg, ZInjection injection,
                         std::uint64_t master_seed) {
  cfg.validate();
  ModelBundle b;
  b.mode = mode;
  b.cfg = cfg;
  b.injection = injection;
  b.zform = mode == Mode::baseline_cyclegan ? ZForm::vector8()
                                            : zform_for(injection, cfg);

  b.g = build_generator_g(cfg);
  init_parameters(*b.g, Rng::stream(master_seed, "init/g"));
  if (mode == Mode::baseline_cyclegan) {
    b.f = Generator(cfg, std::nullopt, std::nullopt);
  } else {
    b.f = build_generator_f(cfg, b.zform, injection);
  }
  init_parameters(*b.f, Rng::stream(master_seed, "init/f"));
  b.d_x = build_patch_discriminator(cfg);
  init_parameters(*b.d_x, Rng::stream(master_seed, "init/d_x"));
  b.d_y = build_patch_discriminator(cfg);
  init_parameters(*b.d_y, Rng::stream(master_seed, "init/d_y"));
  if (mode != Mode::baseline_cyclegan) {
    b.e = build_encoder(cfg, b.zform);
    init_parameters(*b.e, Rng::stream(master_seed, "init/e"));
    b.d_z = build_code_discriminator(cfg, b.zform);
    init_parameters(*b.d_z, Rng::stream(master_seed, "init/d_z"));
  }
  return b;
}

std::vector<torch::Tensor> ModelBundle::generator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : g->parameters()) out.push_back(p);
  for (const auto& p : f->parameters()) out.push_back(p);
  if (has_aux()) {
    for (const auto& p : e->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<torch::Tensor> ModelBundle::discriminator_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : d_x->parameters()) out.push_back(p);
  for (const auto& p : d_y->parameters()) out.push_back(p);
  if (has_aux()) {
    for (const auto& p : d_z->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> ModelBundle::named_tensors()
    const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto add = [&](const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) {
      out.emplace_back("model/" + prefix + "/" + p.key(), p.value());
    }
  };
  add("g", *g);
  add("f", *f);
  if (has_aux()) add("e", *e);
  add("d_x", *d_x);
  add("d_y", *d_y);
  if (has_aux()) add("d_z", *d_z);
  return out;
}

void ModelBundle::to_dtype(torch::Dtype dtype) {
  g->to(dtype);
  f->to(dtype);
  d_x->to(dtype);
  d_y->to(dtype);
  if (has_aux()) {
    e->to(dtype);
    d_z->to(dtype);
  }
}

void ModelBundle::set_discriminator_requires_grad(bool enabled) {
  for (auto& p : discriminator_parameters()) p.set_requires_grad(enabled);
}

void ModelBundle::train_mode(bool on) {
  g->train(on);
  f->train(on);
  d_x->train(on);
  d_y->train(on);
  if (has_aux()) {
    e->train(on);
    d_z->train(on);
  }
}

}  // namespace asymgan
