#include "asymgan/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace asymgan {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (lr_g <= 0 || lr_d <= 0) throw config_error("learning rates must be > 0");
  if (epochs_flat < 1 || epochs_decay < 0) {
    throw config_error("epoch counts must be >= 1 flat, >= 0 decay");
  }
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (pool_size < 0) throw config_error("pool_size must be >= 0");
  weights.validate(mode);
  if (mode != Mode::asym_ext &&
      (disable_adv_ext || disable_perception || disable_tv)) {
    throw config_error("ablation flags are only valid in asym-ext mode");
  }
  if (mode != Mode::baseline_cyclegan) {
    // zform/injection compatibility is enforced at bundle build time.
    (void)z_injection;
  }
}

ExtOptions TrainConfig::ext_options() const {
  ExtOptions opt;
  opt.disable_adv_ext = disable_adv_ext;
  opt.disable_perception = disable_perception;
  opt.disable_tv = disable_tv;
  return opt;
}

json TrainConfig::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["z_injection"] = to_string(z_injection);
  json w;
  for (int i = 1; i <= 9; ++i) {
    w["lambda" + std::to_string(i)] = weights.get(i);
  }
  j["weights"] = w;
  j["lr_g"] = lr_g;
  j["lr_d"] = lr_d;
  j["epochs_flat"] = epochs_flat;
  j["epochs_decay"] = epochs_decay;
  j["batch_size"] = batch_size;
  j["pool_size"] = pool_size;
  j["seed"] = seed;
  j["disable_adv_ext"] = disable_adv_ext;
  j["disable_perception"] = disable_perception;
  j["disable_tv"] = disable_tv;
  j["base_channels"] = base_channels;
  j["n_res_blocks"] = n_res_blocks;
  j["checkpoint_every"] = checkpoint_every;
  j["max_steps"] = max_steps;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.mode = mode_from_string(j.at("mode").get<std::string>());
  c.z_injection = injection_from_string(j.at("z_injection").get<std::string>());
  for (int i = 1; i <= 9; ++i) {
    c.weights.set(i, j.at("weights").at("lambda" + std::to_string(i)).get<double>());
  }
  c.lr_g = j.at("lr_g").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.epochs_flat = j.at("epochs_flat").get<std::int64_t>();
  c.epochs_decay = j.at("epochs_decay").get<std::int64_t>();
  c.batch_size = j.at("batch_size").get<std::int64_t>();
  c.pool_size = j.at("pool_size").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.disable_adv_ext = j.at("disable_adv_ext").get<bool>();
  c.disable_perception = j.at("disable_perception").get<bool>();
  c.disable_tv = j.at("disable_tv").get<bool>();
  c.base_channels = j.at("base_channels").get<std::int64_t>();
  c.n_res_blocks = j.at("n_res_blocks").get<std::int64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  c.max_steps = j.at("max_steps").get<std::int64_t>();
  return c;
}

std::pair<double, double> lr_at(std::int64_t epoch, const TrainConfig& config) {
  const std::int64_t total = config.epochs_flat + config.epochs_decay;
  if (epoch < 0 || epoch >= total) {
    throw config_error("epoch out of range");
  }
  if (epoch < config.epochs_flat) return {config.lr_g, config.lr_d};
  const double scale =
      1.0 - static_cast<double>(epoch - config.epochs_flat) /
                static_cast<double>(config.epochs_decay);
  return {config.lr_g * scale, config.lr_d * scale};
}

// ---------------------------------------------------------------------------
// Image pool
// ---------------------------------------------------------------------------

torch::Tensor ImagePool::query(const torch::Tensor& fakes, Rng& rng) {
  TORCH_CHECK(fakes.dim() == 4, "pool expects BxCxHxW fakes");
  if (capacity_ == 0) return fakes;
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<std::size_t>(fakes.size(0)));
  for (std::int64_t b = 0; b < fakes.size(0); ++b) {
    auto img = fakes[b];
    if (size() < capacity_) {
      buffer_.push_back(img.clone());
      out.push_back(img);
    } else if (rng.uniform() < 0.5) {
      const auto j = static_cast<std::size_t>(rng.randint(capacity_));
      out.push_back(buffer_[j].clone());
      buffer_[j] = img.clone();
    } else {
      out.push_back(img);
    }
  }
  return torch::stack(out, 0);
}

void ImagePool::restore(std::vector<torch::Tensor> buffer) {
  if (static_cast<std::int64_t>(buffer.size()) > capacity_) {
    throw format_error("pool buffer larger than capacity");
  }
  buffer_ = std::move(buffer);
}

torch::Tensor pool_query(ImagePool& pool, const torch::Tensor& fake, Rng& rng) {
  return pool.query(fake, rng);
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer Trainer::create(const TrainConfig& cfg, std::int64_t image_size) {
  cfg.validate();
  NetConfig net;
  net.image_size = image_size;
  net.base_channels = cfg.base_channels;
  net.n_res_blocks = cfg.n_res_blocks;
  auto bundle = build_bundle(cfg.mode, net, cfg.z_injection,
                             Rng::stream(cfg.seed, "init").next_u64());
  Adam opt_g(bundle.generator_parameters());
  Adam opt_d(bundle.discriminator_parameters());
  return Trainer{cfg,
                 image_size,
                 std::move(bundle),
                 std::move(opt_g),
                 std::move(opt_d),
                 ImagePool(cfg.pool_size),
                 ImagePool(cfg.pool_size),
                 0};
}

LossBreakdown Trainer::train_step(const Batch& batch, double lr_g,
                                  double lr_d) {
  const std::int64_t this_step = step;
  Rng zrng = Rng::stream(cfg.seed, "z", static_cast<std::uint64_t>(this_step));

  // Generator-side update: discriminators are frozen spectators here.
  bundle.set_discriminator_requires_grad(false);
  auto obj = evaluate_objective(batch, bundle, cfg.weights, zrng,
                                cfg.ext_options(), /*disc_side=*/false);
  opt_g.zero_grad();
  obj.gen_total.backward();
  opt_g.step(lr_g);
  bundle.set_discriminator_requires_grad(true);

  // Discriminator-side update with pool-mixed image fakes; codes are always
  // fresh. Pool query order is fixed: D_X main, D_X ext fakes, D_Y.
  Rng prng = Rng::stream(cfg.seed, "pool", static_cast<std::uint64_t>(this_step));
  auto fake_x_pool = pool_x.query(obj.fake_x.detach(), prng);
  torch::Tensor x1_pool, x2_pool;
  if (obj.fake_x_ext_gf.has_value()) {
    x1_pool = pool_x.query(obj.fake_x_ext_gf->detach(), prng);
  }
  if (obj.fake_x_ext_fe.has_value()) {
    x2_pool = pool_x.query(obj.fake_x_ext_fe->detach(), prng);
  }
  auto fake_y_pool = pool_y.query(obj.fake_y.detach(), prng);

  auto d_adv_g = lsgan_d_loss(bundle.d_y->forward(batch.y),
                              bundle.d_y->forward(fake_y_pool));
  auto d_x_real = bundle.d_x->forward(batch.x);
  auto d_adv_f = lsgan_d_loss(d_x_real, bundle.d_x->forward(fake_x_pool));
  auto disc_total = d_adv_g + d_adv_f;
  obj.values.d_adv_g = d_adv_g.item<double>();
  obj.values.d_adv_f = d_adv_f.item<double>();
  if (bundle.has_aux()) {
    auto d_adv_e = lsgan_d_loss(bundle.d_z->forward(obj.z_prior),
                                bundle.d_z->forward(obj.code.detach()));
    disc_total = disc_total + cfg.weights.lambda1 * d_adv_e;
    obj.values.d_adv_e = d_adv_e.item<double>();
  }
  if (x1_pool.defined()) {
    auto d_ext_gf = lsgan_d_loss(d_x_real, bundle.d_x->forward(x1_pool));
    disc_total = disc_total + cfg.weights.lambda5 * d_ext_gf;
    obj.values.d_adv_ext_gf = d_ext_gf.item<double>();
  }
  if (x2_pool.defined()) {
    auto d_ext_fe = lsgan_d_loss(d_x_real, bundle.d_x->forward(x2_pool));
    disc_total = disc_total + cfg.weights.lambda6 * d_ext_fe;
    obj.values.d_adv_ext_fe = d_ext_fe.item<double>();
  }
  obj.values.total_discriminatorside = disc_total.item<double>();

  opt_d.zero_grad();
  disc_total.backward();
  opt_d.step(lr_d);

  ++step;
  if (!obj.values.all_finite()) {
    throw numeric_error("non-finite loss at step " +
                        std::to_string(this_step));
  }
  return obj.values;
}

void Trainer::save_checkpoint(const fs::path& path, std::int64_t epoch) const {
  std::vector<std::pair<std::string, torch::Tensor>> tensors =
      bundle.named_tensors();
  for (auto& kv : opt_g.named_state("opt/g")) tensors.push_back(kv);
  for (auto& kv : opt_d.named_state("opt/d")) tensors.push_back(kv);
  for (std::size_t i = 0; i < pool_x.buffer().size(); ++i) {
    tensors.emplace_back("pool/x/" + std::to_string(i), pool_x.buffer()[i]);
  }
  for (std::size_t i = 0; i < pool_y.buffer().size(); ++i) {
    tensors.emplace_back("pool/y/" + std::to_string(i), pool_y.buffer()[i]);
  }
  json scalars;
  scalars["step"] = step;
  scalars["epoch"] = epoch;
  scalars["image_size"] = image_size;
  scalars["opt_g_steps"] = opt_g.step_count();
  scalars["opt_d_steps"] = opt_d.step_count();
  scalars["pool_x_size"] = pool_x.size();
  scalars["pool_y_size"] = pool_y.size();
  scalars["config"] = cfg.to_json();
  write_checkpoint(path.string(), tensors, scalars);
}

Trainer Trainer::restore(const fs::path& checkpoint_path) {
  auto file = read_checkpoint(checkpoint_path.string());
  TrainConfig cfg = TrainConfig::from_json(file.scalars.at("config"));
  const auto image_size = file.scalars.at("image_size").get<std::int64_t>();
  Trainer t = Trainer::create(cfg, image_size);

  torch::NoGradGuard guard;
  for (auto& [name, param] : t.bundle.named_tensors()) {
    auto it = file.tensors.find(name);
    if (it == file.tensors.end()) {
      throw format_error("checkpoint missing tensor " + name);
    }
    param.copy_(it->second);
  }
  t.opt_g.restore("opt/g", file.tensors,
                  file.scalars.at("opt_g_steps").get<std::int64_t>());
  t.opt_d.restore("opt/d", file.tensors,
                  file.scalars.at("opt_d_steps").get<std::int64_t>());

  auto load_pool = [&](const std::string& prefix, std::int64_t n,
                       ImagePool& pool) {
    std::vector<torch::Tensor> buf;
    for (std::int64_t i = 0; i < n; ++i) {
      auto it = file.tensors.find(prefix + std::to_string(i));
      if (it == file.tensors.end()) {
        throw format_error("checkpoint missing pool tensor " + prefix +
                           std::to_string(i));
      }
      buf.push_back(it->second);
    }
    pool.restore(std::move(buf));
  };
  load_pool("pool/x/", file.scalars.at("pool_x_size").get<std::int64_t>(),
            t.pool_x);
  load_pool("pool/y/", file.scalars.at("pool_y_size").get<std::int64_t>(),
            t.pool_y);
  t.step = file.scalars.at("step").get<std::int64_t>();
  return t;
}

Trainer load_checkpoint(const fs::path& path) { return Trainer::restore(path); }

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

void write_csv_row(std::ofstream& os, std::int64_t step, std::int64_t epoch,
                   const std::string& term, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  os << step << "," << epoch << "," << term << "," << buf << "\n";
}

}  // namespace

CheckpointSeries train(const TrainConfig& config,
                       const DatasetManifest& manifest,
                       const fs::path& out_dir,
                       const std::optional<fs::path>& resume) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  Dataset dataset(manifest);
  Trainer trainer = resume.has_value()
                        ? Trainer::restore(*resume)
                        : Trainer::create(config, manifest.spec.image_size);

  const std::int64_t spe = steps_per_epoch(dataset, trainer.cfg.batch_size);
  std::int64_t total_steps =
      (trainer.cfg.epochs_flat + trainer.cfg.epochs_decay) * spe;
  if (trainer.cfg.max_steps > 0) {
    total_steps = std::min(total_steps, trainer.cfg.max_steps);
  }

  CheckpointSeries series;
  series.loss_csv = out_dir / "losses.csv";
  std::ofstream csv(series.loss_csv, std::ios::trunc);
  if (!csv) throw io_error("cannot write " + series.loss_csv.string());
  csv << "step,epoch,term,value\n";

  const std::uint64_t data_seed =
      Rng::stream(trainer.cfg.seed, "data").next_u64();

  auto checkpoint_name = [&](std::int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%06" PRId64 ".asym", step);
    return out_dir / buf;
  };

  while (trainer.step < total_steps) {
    const std::int64_t step = trainer.step;
    const std::int64_t epoch = step / spe;
    const auto [lr_g, lr_d] = lr_at(epoch, trainer.cfg);
    Batch batch =
        unpaired_batch(dataset, data_seed, step, trainer.cfg.batch_size);
    LossBreakdown breakdown;
    try {
      breakdown = trainer.train_step(batch, lr_g, lr_d);
    } catch (const numeric_error&) {
      trainer.save_checkpoint(out_dir / "diagnostic.asym", epoch);
      throw;
    }
    for (const auto& [term, value] : breakdown.items()) {
      write_csv_row(csv, step, epoch, term, value);
    }
    if (trainer.cfg.checkpoint_every > 0 &&
        trainer.step % trainer.cfg.checkpoint_every == 0 &&
        trainer.step < total_steps) {
      auto path = checkpoint_name(trainer.step);
      trainer.save_checkpoint(path, trainer.step / spe);
      series.checkpoints.push_back(path);
    }
  }

  series.final_checkpoint = out_dir / "final.asym";
  const std::int64_t last_epoch =
      total_steps > 0 ? (total_steps - 1) / spe : 0;
  trainer.save_checkpoint(series.final_checkpoint, last_epoch);
  series.checkpoints.push_back(series.final_checkpoint);
  csv.flush();
  if (!csv) throw io_error("loss csv write failed");
  return series;
}

}  // namespace asymgan
