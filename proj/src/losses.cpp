#include "asymgan/losses.hpp"

#include <cmath>

namespace asymgan {

LossWeights LossWeights::for_mode(Mode mode) {
  LossWeights w;
  if (mode == Mode::baseline_cyclegan) {
    w.lambda1 = 0;
    w.lambda4 = 0;
  }
  if (mode != Mode::asym_ext) {
    w.lambda5 = w.lambda6 = w.lambda7 = w.lambda8 = w.lambda9 = 0;
  }
  return w;
}

void LossWeights::validate(Mode mode) const {
  const double all[] = {lambda1, lambda2, lambda3, lambda4, lambda5,
                        lambda6, lambda7, lambda8, lambda9};
  for (double v : all) {
    if (v < 0 || !std::isfinite(v)) {
      throw config_error("loss weights must be finite and >= 0");
    }
  }
  if (mode != Mode::asym_ext &&
      (lambda5 != 0 || lambda6 != 0 || lambda7 != 0 || lambda8 != 0 ||
       lambda9 != 0)) {
    throw config_error("extension weights must be 0 outside asym-ext mode");
  }
}

double LossWeights::get(int index) const {
  switch (index) {
    case 1: return lambda1;
    case 2: return lambda2;
    case 3: return lambda3;
    case 4: return lambda4;
    case 5: return lambda5;
    case 6: return lambda6;
    case 7: return lambda7;
    case 8: return lambda8;
    case 9: return lambda9;
  }
  throw config_error("lambda index out of range");
}

void LossWeights::set(int index, double value) {
  switch (index) {
    case 1: lambda1 = value; return;
    case 2: lambda2 = value; return;
    case 3: lambda3 = value; return;
    case 4: lambda4 = value; return;
    case 5: lambda5 = value; return;
    case 6: lambda6 = value; return;
    case 7: lambda7 = value; return;
    case 8: lambda8 = value; return;
    case 9: lambda9 = value; return;
  }
  throw config_error("lambda index out of range");
}

std::vector<std::pair<std::string, double>> LossBreakdown::items() const {
  return {{"adv_g", adv_g},
          {"adv_f", adv_f},
          {"adv_e", adv_e},
          {"cyc_x", cyc_x},
          {"cyc_y", cyc_y},
          {"cyc_z", cyc_z},
          {"adv_ext_gf", adv_ext_gf},
          {"adv_ext_fe", adv_ext_fe},
          {"content", content},
          {"style", style},
          {"tv", tv},
          {"d_adv_g", d_adv_g},
          {"d_adv_f", d_adv_f},
          {"d_adv_e", d_adv_e},
          {"d_adv_ext_gf", d_adv_ext_gf},
          {"d_adv_ext_fe", d_adv_ext_fe},
          {"total_generatorside", total_generatorside},
          {"total_discriminatorside", total_discriminatorside}};
}

bool LossBreakdown::all_finite() const {
  for (const auto& [name, v] : items()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Elementwise terms
// ---------------------------------------------------------------------------

torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores,
                           const torch::Tensor& fake_scores) {
  if (real_scores.numel() == 0 || fake_scores.numel() == 0) {
    throw shape_error("lsgan_d_loss: empty score tensor");
  }
  return (real_scores - 1).pow(2).mean() + fake_scores.pow(2).mean();
}

torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores) {
  if (fake_scores.numel() == 0) {
    throw shape_error("lsgan_g_loss: empty score tensor");
  }
  return (fake_scores - 1).pow(2).mean();
}

torch::Tensor cycle_l1(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw shape_error("cycle_l1: shape mismatch");
  }
  return (a - b).abs().mean();
}

torch::Tensor gram_matrix(const torch::Tensor& feature) {
  TORCH_CHECK(feature.dim() == 4, "gram_matrix expects BxCxHxW features");
  const std::int64_t b = feature.size(0), c = feature.size(1);
  const std::int64_t h = feature.size(2), w = feature.size(3);
  auto flat = feature.reshape({b, c, h * w});
  return flat.bmm(flat.transpose(1, 2)) / static_cast<double>(c * h * w);
}

torch::Tensor perception_content(const torch::Tensor& gen_photo,
                                 const torch::Tensor& y,
                                 std::int64_t layer_j) {
  auto fa = feature_extractor(gen_photo, layer_j);
  auto fb = feature_extractor(y, layer_j);
  // Mean over all elements = per-sample 1/(C_j H_j W_j) sum, averaged over
  // the batch.
  return (fa - fb).pow(2).mean();
}

torch::Tensor perception_style(const torch::Tensor& gen_photo,
                               const torch::Tensor& x, std::int64_t layer_j) {
  auto ga = gram_matrix(feature_extractor(gen_photo, layer_j));
  auto gb = gram_matrix(feature_extractor(x, layer_j));
  return (ga - gb).pow(2).sum({1, 2}).mean();
}

torch::Tensor total_variation(const torch::Tensor& image, bool literal_minus) {
  TORCH_CHECK(image.dim() == 4, "total_variation expects BxCxHxW images");
  const std::int64_t h = image.size(2), w = image.size(3);
  if (h < 2 || w < 2) {
    throw shape_error("total_variation: image must be at least 2x2");
  }
  // Differences over the (H-1)x(W-1) interior grid.
  auto core = image.slice(2, 0, h - 1).slice(3, 0, w - 1);
  auto horiz = image.slice(2, 0, h - 1).slice(3, 1, w) - core;
  auto vert = image.slice(2, 1, h).slice(3, 0, w - 1) - core;
  auto combined = literal_minus ? horiz.pow(2) - vert.pow(2)
                                : horiz.pow(2) + vert.pow(2);
  return combined.sum({1, 2, 3}).mean();
}

// ---------------------------------------------------------------------------
// Composite objectives
// ---------------------------------------------------------------------------

namespace {

double value_of(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

namespace {

Objective cyclegan_core(const Batch& batch, ModelBundle& bundle,
                        const LossWeights& w, bool disc_side) {
  if (bundle.mode != Mode::baseline_cyclegan) {
    throw config_error("cyclegan_objective requires baseline mode");
  }
  Objective o;
  auto fake_y = bundle.g->forward(batch.x);
  auto rec_x = bundle.f->forward(fake_y);
  auto fake_x = bundle.f->forward(batch.y);
  auto rec_y = bundle.g->forward(fake_x);

  auto adv_g = lsgan_g_loss(bundle.d_y->forward(fake_y));
  auto adv_f = lsgan_g_loss(bundle.d_x->forward(fake_x));
  auto cyc_x = cycle_l1(rec_x, batch.x);
  auto cyc_y = cycle_l1(rec_y, batch.y);
  o.gen_total = adv_g + adv_f + w.lambda2 * cyc_x + w.lambda3 * cyc_y;

  o.values.adv_g = value_of(adv_g);
  o.values.adv_f = value_of(adv_f);
  o.values.cyc_x = value_of(cyc_x);
  o.values.cyc_y = value_of(cyc_y);
  o.values.total_generatorside = value_of(o.gen_total);
  if (disc_side) {
    auto d_adv_g = lsgan_d_loss(bundle.d_y->forward(batch.y),
                                bundle.d_y->forward(fake_y.detach()));
    auto d_adv_f = lsgan_d_loss(bundle.d_x->forward(batch.x),
                                bundle.d_x->forward(fake_x.detach()));
    o.disc_total = d_adv_g + d_adv_f;
    o.values.d_adv_g = value_of(d_adv_g);
    o.values.d_adv_f = value_of(d_adv_f);
    o.values.total_discriminatorside = value_of(o.disc_total);
  }
  o.fake_y = fake_y;
  o.fake_x = fake_x;
  o.z_prior = torch::Tensor();
  return o;
}

// Shared core of Eq. 13 / Eq. 19: the extension groups are only evaluated
// when their weights are nonzero and their ablation flag is off, so the
// reduced objective is bitwise identical to the plain one.
Objective asym_core(const Batch& batch, ModelBundle& bundle,
                    const LossWeights& w, Rng rng, bool extended,
                    const ExtOptions& opt, bool disc_side) {
  if (!bundle.has_aux()) {
    throw config_error("asym objective requires an aux-enabled bundle");
  }
  Objective o;
  const auto dtype = batch.x.scalar_type();
  auto z = sample_z(bundle.zform, batch.x.size(0), bundle.cfg.image_size, rng,
                    dtype);
  o.z_prior = z;

  // Forward loop: x -> y_hat -> x*.
  auto fake_y = bundle.g->forward(batch.x);
  auto code = bundle.e->forward(batch.x);
  auto rec_x = bundle.f->forward(fake_y, code);
  // Backward loop: y -> x_hat -> y*, z -> z*.
  auto fake_x = bundle.f->forward(batch.y, z);
  auto rec_y = bundle.g->forward(fake_x);
  auto rec_z = bundle.e->forward(fake_x);

  auto adv_g = lsgan_g_loss(bundle.d_y->forward(fake_y));
  auto adv_f = lsgan_g_loss(bundle.d_x->forward(fake_x));
  auto adv_e = lsgan_g_loss(bundle.d_z->forward(code));
  auto cyc_x = cycle_l1(rec_x, batch.x);
  auto cyc_y = cycle_l1(rec_y, batch.y);
  auto cyc_z = cycle_l1(rec_z, z);

  auto gen_total = adv_g + adv_f + w.lambda1 * adv_e + w.lambda2 * cyc_x +
                   w.lambda3 * cyc_y + w.lambda4 * cyc_z;

  torch::Tensor disc_total;
  if (disc_side) {
    auto d_adv_g = lsgan_d_loss(bundle.d_y->forward(batch.y),
                                bundle.d_y->forward(fake_y.detach()));
    auto d_adv_f = lsgan_d_loss(bundle.d_x->forward(batch.x),
                                bundle.d_x->forward(fake_x.detach()));
    auto d_adv_e = lsgan_d_loss(bundle.d_z->forward(z),
                                bundle.d_z->forward(code.detach()));
    disc_total = d_adv_g + d_adv_f + w.lambda1 * d_adv_e;
    o.values.d_adv_g = value_of(d_adv_g);
    o.values.d_adv_f = value_of(d_adv_f);
    o.values.d_adv_e = value_of(d_adv_e);
  }

  o.values.adv_g = value_of(adv_g);
  o.values.adv_f = value_of(adv_f);
  o.values.adv_e = value_of(adv_e);
  o.values.cyc_x = value_of(cyc_x);
  o.values.cyc_y = value_of(cyc_y);
  o.values.cyc_z = value_of(cyc_z);

  if (extended) {
    const bool adv_on =
        !opt.disable_adv_ext && (w.lambda5 > 0 || w.lambda6 > 0);
    const bool perception_on =
        !opt.disable_perception && (w.lambda7 > 0 || w.lambda8 > 0);
    const bool tv_on = !opt.disable_tv && w.lambda9 > 0;

    const bool need_x1 = (adv_on && w.lambda5 > 0) || tv_on;
    const bool need_x2 = (adv_on && w.lambda6 > 0) || perception_on || tv_on;

    torch::Tensor x1, x2;
    if (need_x1) x1 = bundle.f->forward(fake_y, z);
    if (need_x2) x2 = bundle.f->forward(batch.y, code);

    if (adv_on && w.lambda5 > 0) {
      auto adv_ext_gf = lsgan_g_loss(bundle.d_x->forward(x1));
      gen_total = gen_total + w.lambda5 * adv_ext_gf;
      o.values.adv_ext_gf = value_of(adv_ext_gf);
      o.fake_x_ext_gf = x1;
      if (disc_side) {
        auto d_ext_gf = lsgan_d_loss(bundle.d_x->forward(batch.x),
                                     bundle.d_x->forward(x1.detach()));
        disc_total = disc_total + w.lambda5 * d_ext_gf;
        o.values.d_adv_ext_gf = value_of(d_ext_gf);
      }
    }
    if (adv_on && w.lambda6 > 0) {
      auto adv_ext_fe = lsgan_g_loss(bundle.d_x->forward(x2));
      gen_total = gen_total + w.lambda6 * adv_ext_fe;
      o.values.adv_ext_fe = value_of(adv_ext_fe);
      o.fake_x_ext_fe = x2;
      if (disc_side) {
        auto d_ext_fe = lsgan_d_loss(bundle.d_x->forward(batch.x),
                                     bundle.d_x->forward(x2.detach()));
        disc_total = disc_total + w.lambda6 * d_ext_fe;
        o.values.d_adv_ext_fe = value_of(d_ext_fe);
      }
    }
    if (perception_on) {
      if (w.lambda7 > 0) {
        auto content = perception_content(x2, batch.y, kPerceptionLayer);
        gen_total = gen_total + w.lambda7 * content;
        o.values.content = value_of(content);
      }
      if (w.lambda8 > 0) {
        auto style = perception_style(x2, batch.x, kPerceptionLayer);
        gen_total = gen_total + w.lambda8 * style;
        o.values.style = value_of(style);
      }
    }
    if (tv_on) {
      // The six synthesis results of the TV regularizer.
      auto tv = total_variation(fake_y, opt.tv_literal_minus) +
                total_variation(rec_x, opt.tv_literal_minus) +
                total_variation(x1, opt.tv_literal_minus) +
                total_variation(fake_x, opt.tv_literal_minus) +
                total_variation(rec_y, opt.tv_literal_minus) +
                total_variation(x2, opt.tv_literal_minus);
      gen_total = gen_total + w.lambda9 * tv;
      o.values.tv = value_of(tv);
    }
  }

  o.gen_total = gen_total;
  o.values.total_generatorside = value_of(gen_total);
  if (disc_side) {
    o.disc_total = disc_total;
    o.values.total_discriminatorside = value_of(disc_total);
  }
  o.fake_y = fake_y;
  o.fake_x = fake_x;
  o.code = code;
  return o;
}

}  // namespace

Objective asym_objective(const Batch& batch, ModelBundle& bundle,
                         const LossWeights& w, Rng rng) {
  return asym_core(batch, bundle, w, rng, /*extended=*/false, {},
                   /*disc_side=*/true);
}

Objective asym_objective_ext(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w, Rng rng,
                             const ExtOptions& opt) {
  return asym_core(batch, bundle, w, rng, /*extended=*/true, opt,
                   /*disc_side=*/true);
}

Objective cyclegan_objective(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w) {
  return cyclegan_core(batch, bundle, w, /*disc_side=*/true);
}

Objective evaluate_objective(const Batch& batch, ModelBundle& bundle,
                             const LossWeights& w, Rng rng,
                             const ExtOptions& opt, bool disc_side) {
  switch (bundle.mode) {
    case Mode::baseline_cyclegan:
      return cyclegan_core(batch, bundle, w, disc_side);
    case Mode::asym_no_ext:
      return asym_core(batch, bundle, w, rng, false, {}, disc_side);
    case Mode::asym_ext:
      return asym_core(batch, bundle, w, rng, true, opt, disc_side);
  }
  throw config_error("unknown mode");
}

}  // namespace asymgan
