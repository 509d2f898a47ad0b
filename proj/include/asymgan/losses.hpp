#ifndef ASYMGAN_LOSSES_HPP
#define ASYMGAN_LOSSES_HPP

#include <torch/torch.h>

#include <optional>

#include "asymgan/common.hpp"
#include "asymgan/nets.hpp"
#include "asymgan/rng.hpp"

namespace asymgan {

struct LossWeights {
  double lambda1 = 1.0;    // L_A(E, D_Z)
  double lambda2 = 10.0;   // L_CX
  double lambda3 = 10.0;   // L_CY
  double lambda4 = 10.0;   // L_CZ
  double lambda5 = 1.0;    // L_A^ext(G, F, D_X)
  double lambda6 = 1.0;    // L_A^ext(F, E, D_X)
  double lambda7 = 0.2;    // content
  double lambda8 = 0.1;    // style
  double lambda9 = 10.0;   // TV

  static LossWeights for_mode(Mode mode);
  void validate(Mode mode) const;
  double get(int index) const;
  void set(int index, double value);
};

// One named value per objective term, generator side and discriminator side,
// plus the lambda-weighted totals.
struct LossBreakdown {
  double adv_g = 0, adv_f = 0, adv_e = 0;
  double cyc_x = 0, cyc_y = 0, cyc_z = 0;
  double adv_ext_gf = 0, adv_ext_fe = 0;
  double content = 0, style = 0, tv = 0;
  double d_adv_g = 0, d_adv_f = 0, d_adv_e = 0;
  double d_adv_ext_gf = 0, d_adv_ext_fe = 0;
  double total_generatorside = 0, total_discriminatorside = 0;

  std::vector<std::pair<std::string, double>> items() const;
  bool all_finite() const;
};

struct Batch {
  torch::Tensor x;  // information-rich domain
  torch::Tensor y;  // information-poor domain
};

// ---- elementwise loss terms (LSGAN semantics for adversarial ones) ----

torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores,
                           const torch::Tensor& fake_scores);
torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores);
torch::Tensor cycle_l1(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor gram_matrix(const torch::Tensor& feature);  // BxCxHxW -> BxCxC
torch::Tensor perception_content(const torch::Tensor& gen_photo,
                                 const torch::Tensor& y, std::int64_t layer_j);
torch::Tensor perception_style(const torch::Tensor& gen_photo,
                               const torch::Tensor& x, std::int64_t layer_j);
torch::Tensor total_variation(const torch::Tensor& image,
                              bool literal_minus = false);

/// Perception layer used by both content and style terms.
inline constexpr std::int64_t kPerceptionLayer = 2;

// ---- composite objectives ----

struct Objective {
  LossBreakdown values;
  torch::Tensor gen_total;   // differentiable, minimized by G/F/E
  torch::Tensor disc_total;  // differentiable, minimized by D_X/D_Y/D_Z
  // Fresh fakes (attached to the generator graph) for pool-based D updates.
  torch::Tensor fake_y;                         // G(x)
  torch::Tensor fake_x;                         // F(y, z) / F(y)
  std::optional<torch::Tensor> fake_x_ext_gf;   // F(G(x), z)
  std::optional<torch::Tensor> fake_x_ext_fe;   // F(y, E(x))
  torch::Tensor code;                           // E(x)
  torch::Tensor z_prior;                        // the z ~ N(0, I) draw
};

struct ExtOptions {
  bool disable_adv_ext = false;
  bool disable_perception = false;
  bool disable_tv = false;
  bool tv_literal_minus = false;
};

Objective asym_objective(const Batch& batch, ModelBundle& bundle,
                         const LossWeights& w, Rng rng);
Objective asym_objective_ext(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w, Rng rng,
                             const ExtOptions& opt = {});
Objective cyclegan_objective(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w);

/// Objective dispatch on bundle.mode. `disc_side=false` skips the
/// discriminator-target terms (the trainer rebuilds them with pooled fakes).
Objective evaluate_objective(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w, Rng rng,
                             const ExtOptions& opt = {},
                             bool disc_side = true);

}  // namespace asymgan

#endif
