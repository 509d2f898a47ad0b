#include "asymgan/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "asymgan/image_io.hpp"
#include "asymgan/rng.hpp"

namespace asymgan {

namespace {

using json = nlohmann::ordered_json;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ULL;
  x ^= x >> 33;
  return x;
}

// Hash of integer lattice coordinates -> [0, 1).
double lattice_noise(std::uint64_t seed, std::int64_t xi, std::int64_t yi,
                     std::uint64_t salt) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(xi) * 0x9E3779B97F4A7C15ULL) ^
                          mix64(static_cast<std::uint64_t>(yi) + salt * 0xBF58476D1CE4E5B9ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Bilinear value noise over a hashed lattice.
double value_noise(std::uint64_t seed, double u, double v, std::uint64_t salt) {
  const double fu = std::floor(u), fv = std::floor(v);
  const auto xi = static_cast<std::int64_t>(fu);
  const auto yi = static_cast<std::int64_t>(fv);
  const double tu = smoothstep(u - fu), tv = smoothstep(v - fv);
  const double n00 = lattice_noise(seed, xi, yi, salt);
  const double n10 = lattice_noise(seed, xi + 1, yi, salt);
  const double n01 = lattice_noise(seed, xi, yi + 1, salt);
  const double n11 = lattice_noise(seed, xi + 1, yi + 1, salt);
  const double a = n00 + (n10 - n00) * tu;
  const double b = n01 + (n11 - n01) * tu;
  return a + (b - a) * tv;
}

// Rotate an RGB triple around the gray axis (cheap hue shift).
std::array<double, 3> hue_rotate(const std::array<double, 3>& c,
                                 double angle) {
  const double k = 1.0 / std::sqrt(3.0);
  const double cosa = std::cos(angle), sina = std::sin(angle);
  const double dot = k * (c[0] + c[1] + c[2]);
  std::array<double, 3> cross = {k * (c[2] - c[1]), k * (c[0] - c[2]),
                                 k * (c[1] - c[0])};
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i) {
    out[i] = c[i] * cosa + cross[i] * sina + k * dot * (1.0 - cosa);
  }
  return out;
}

}  // namespace

torch::Tensor palette_color(const Rgb& rgb) {
  auto t = torch::empty({3}, torch::kF32);
  for (int c = 0; c < 3; ++c) {
    t[c] = static_cast<float>(rgb[static_cast<std::size_t>(c)]) / 127.5f - 1.0f;
  }
  return t;
}

SceneSpec SceneSpec::defaults(std::int64_t image_size, std::int64_t n_classes) {
  SceneSpec spec;
  spec.image_size = image_size;
  spec.n_classes = n_classes;
  const std::vector<Rgb> base = {
      {{220, 50, 47}},   // red
      {{64, 176, 72}},   // green
      {{56, 98, 222}},   // blue
      {{238, 204, 66}},  // yellow
      {{152, 74, 190}},  // purple
      {{40, 180, 190}},  // teal
      {{240, 130, 40}},  // orange
      {{110, 110, 110}}, // gray
  };
  if (n_classes > static_cast<std::int64_t>(base.size())) {
    throw config_error("default palette supports at most 8 classes");
  }
  spec.palette.assign(base.begin(), base.begin() + n_classes);
  return spec;
}

void SceneSpec::validate() const {
  if (n_classes < 2) throw config_error("n_classes must be >= 2");
  if (static_cast<std::int64_t>(palette.size()) != n_classes) {
    throw config_error("palette size must equal n_classes");
  }
  if (image_size < 8) throw config_error("image_size must be >= 8");
  if (texture_octaves < 1) throw config_error("texture_octaves must be >= 1");
  for (std::size_t i = 0; i < palette.size(); ++i) {
    for (std::size_t j = i + 1; j < palette.size(); ++j) {
      int dist = 0;
      for (int c = 0; c < 3; ++c) {
        dist = std::max(dist, std::abs(int(palette[i][static_cast<std::size_t>(c)]) -
                                       int(palette[j][static_cast<std::size_t>(c)])));
      }
      if (dist < 32) {
        throw config_error("palette colors must differ by >= 32 in some channel");
      }
    }
  }
}

Scene gen_scene(std::uint64_t seed, const SceneSpec& spec,
                std::optional<StyleVec> style_in) {
  spec.validate();
  const std::int64_t n = spec.image_size;

  StyleVec style;
  if (style_in.has_value()) {
    style = *style_in;
  } else {
    Rng srng = Rng::stream(seed, "style");
    for (auto& v : style) v = srng.uniform(-1.0, 1.0);
  }

  // Voronoi layout: 2 sites per class, nearest site wins (ties to the lower
  // site index), so every class is present.
  const std::int64_t n_sites = 2 * spec.n_classes;
  Rng lrng = Rng::stream(seed, "layout");
  std::vector<double> sx(static_cast<std::size_t>(n_sites));
  std::vector<double> sy(static_cast<std::size_t>(n_sites));
  for (std::int64_t i = 0; i < n_sites; ++i) {
    sx[static_cast<std::size_t>(i)] = lrng.uniform(0.0, double(n));
    sy[static_cast<std::size_t>(i)] = lrng.uniform(0.0, double(n));
  }

  auto class_map = torch::empty({n, n}, torch::kLong);
  auto cm = class_map.accessor<std::int64_t, 2>();
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      double best = 1e300;
      std::int64_t best_site = 0;
      for (std::int64_t s = 0; s < n_sites; ++s) {
        const double dx = double(c) + 0.5 - sx[static_cast<std::size_t>(s)];
        const double dy = double(r) + 0.5 - sy[static_cast<std::size_t>(s)];
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          best_site = s;
        }
      }
      cm[r][c] = best_site % spec.n_classes;
    }
  }

  auto label = torch::empty({3, n, n}, torch::kF32);
  auto la = label.accessor<float, 3>();
  std::vector<std::array<float, 3>> pal_f(static_cast<std::size_t>(spec.n_classes));
  for (std::int64_t k = 0; k < spec.n_classes; ++k) {
    for (int c = 0; c < 3; ++c) {
      pal_f[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] =
          static_cast<float>(spec.palette[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) /
              127.5f - 1.0f;
    }
  }
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      const auto k = static_cast<std::size_t>(cm[r][c]);
      for (int ch = 0; ch < 3; ++ch) {
        la[ch][r][c] = pal_f[k][static_cast<std::size_t>(ch)];
      }
    }
  }

  // Photo: per-class base color and procedural texture, modulated by the
  // style factor (hue shift / lighting gain / texture phase) the label does
  // not carry.
  const double hue = style[0] * 0.6;
  const double gain = 1.0 + 0.25 * style[1];
  const double phase = style[2] * 8.0;

  auto photo = torch::empty({3, n, n}, torch::kF32);
  auto ph = photo.accessor<float, 3>();
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      const std::int64_t k = cm[r][c];
      // Class base colors are a brightened, slightly desaturated version of
      // the label palette, so photos live in a related but distinct space.
      std::array<double, 3> base;
      for (int ch = 0; ch < 3; ++ch) {
        const double p =
            spec.palette[static_cast<std::size_t>(k)][static_cast<std::size_t>(ch)] / 255.0;
        base[static_cast<std::size_t>(ch)] = 0.25 + 0.6 * p;
      }
      // Multi-octave value noise with per-class frequency and orientation.
      const double angle = 0.7 * double(k);
      const double u0 = (std::cos(angle) * double(c) - std::sin(angle) * double(r)) / double(n);
      const double v0 = (std::sin(angle) * double(c) + std::cos(angle) * double(r)) / double(n);
      const double freq = 4.0 + 2.0 * double(k);
      double tex = 0.0, amp = 0.5, norm = 0.0;
      for (std::int64_t o = 0; o < spec.texture_octaves; ++o) {
        const double f = freq * double(1 << o);
        tex += amp * value_noise(seed, u0 * f + phase, v0 * f + 0.5 * phase,
                                 static_cast<std::uint64_t>(k * 16 + o));
        norm += amp;
        amp *= 0.5;
      }
      tex /= norm;
      // Fine grain keeps the photo domain information-dense.
      const double grain =
          0.08 * (lattice_noise(seed, r, c, 0xF00D) - 0.5);
      std::array<double, 3> col;
      for (int ch = 0; ch < 3; ++ch) {
        col[static_cast<std::size_t>(ch)] =
            base[static_cast<std::size_t>(ch)] * (0.55 + 0.55 * tex) * gain + grain;
      }
      col = hue_rotate(col, hue);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(col[static_cast<std::size_t>(ch)], 0.0, 1.0);
        ph[ch][r][c] = static_cast<float>(v * 2.0 - 1.0);
      }
    }
  }

  return Scene{label, photo, class_map, style};
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

json spec_to_json(const SceneSpec& spec) {
  json j;
  j["image_size"] = spec.image_size;
  j["n_classes"] = spec.n_classes;
  j["palette"] = json::array();
  for (const auto& rgb : spec.palette) {
    j["palette"].push_back({rgb[0], rgb[1], rgb[2]});
  }
  j["texture_octaves"] = spec.texture_octaves;
  j["style_dims"] = spec.style_dims;
  return j;
}

SceneSpec spec_from_json(const json& j) {
  SceneSpec spec;
  spec.image_size = j.at("image_size").get<std::int64_t>();
  spec.n_classes = j.at("n_classes").get<std::int64_t>();
  for (const auto& p : j.at("palette")) {
    spec.palette.push_back(Rgb{p.at(0).get<std::uint8_t>(),
                               p.at(1).get<std::uint8_t>(),
                               p.at(2).get<std::uint8_t>()});
  }
  spec.texture_octaves = j.at("texture_octaves").get<std::int64_t>();
  spec.style_dims = j.at("style_dims").get<std::int64_t>();
  return spec;
}

}  // namespace

void DatasetManifest::save(const std::filesystem::path& manifest_path) const {
  json j;
  j["format"] = "asymgan-dataset";
  j["version"] = 1;
  j["master_seed"] = master_seed;
  j["spec"] = spec_to_json(spec);
  j["n_train_x"] = n_train_x;
  j["n_train_y"] = n_train_y;
  j["n_val_pairs"] = n_val_pairs;
  j["train_x"] = json::array();
  for (const auto& e : train_x) {
    j["train_x"].push_back({{"photo", e.file}, {"scene_seed", e.scene_seed}});
  }
  j["train_y"] = json::array();
  for (const auto& e : train_y) {
    j["train_y"].push_back({{"label", e.file}, {"scene_seed", e.scene_seed}});
  }
  j["val"] = json::array();
  for (const auto& e : val) {
    j["val"].push_back({{"label", e.label},
                        {"photo", e.photo},
                        {"class_map", e.class_map},
                        {"scene_seed", e.scene_seed}});
  }
  std::ofstream os(manifest_path);
  if (!os) throw io_error("cannot write manifest: " + manifest_path.string());
  os << j.dump(2) << "\n";
  if (!os) throw io_error("manifest write failed: " + manifest_path.string());
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot read manifest: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw format_error("invalid manifest JSON (" + path.string() +
                       "): " + e.what());
  }
  if (j.value("format", "") != "asymgan-dataset") {
    throw format_error("not a dataset manifest: " + path.string());
  }
  DatasetManifest m;
  m.root_path = path.parent_path();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.spec = spec_from_json(j.at("spec"));
  m.n_train_x = j.at("n_train_x").get<std::int64_t>();
  m.n_train_y = j.at("n_train_y").get<std::int64_t>();
  m.n_val_pairs = j.at("n_val_pairs").get<std::int64_t>();
  for (const auto& e : j.at("train_x")) {
    m.train_x.push_back({e.at("photo").get<std::string>(),
                         e.at("scene_seed").get<std::uint64_t>()});
  }
  for (const auto& e : j.at("train_y")) {
    m.train_y.push_back({e.at("label").get<std::string>(),
                         e.at("scene_seed").get<std::uint64_t>()});
  }
  for (const auto& e : j.at("val")) {
    m.val.push_back({e.at("label").get<std::string>(),
                     e.at("photo").get<std::string>(),
                     e.at("class_map").get<std::string>(),
                     e.at("scene_seed").get<std::uint64_t>()});
  }
  return m;
}

DatasetManifest make_dataset(const SceneSpec& spec, const DatasetCounts& counts,
                             std::uint64_t master_seed,
                             const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "trainX", ec);
  fs::create_directories(out_dir / "trainY", ec);
  fs::create_directories(out_dir / "val", ec);
  if (ec) throw io_error("cannot create dataset dirs under " + out_dir.string());

  auto scene_seed = [&](std::string_view domain, std::int64_t i) {
    return Rng::stream(master_seed, domain, static_cast<std::uint64_t>(i))
        .next_u64();
  };
  auto index_name = [](std::int64_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(i));
    return std::string(buf);
  };

  DatasetManifest m;
  m.root_path = out_dir;
  m.spec = spec;
  m.master_seed = master_seed;
  m.n_train_x = counts.n_train_x;
  m.n_train_y = counts.n_train_y;
  m.n_val_pairs = counts.n_val_pairs;

  for (std::int64_t i = 0; i < counts.n_train_x; ++i) {
    const auto seed = scene_seed("scene/x", i);
    auto scene = gen_scene(seed, spec);
    const std::string rel = "trainX/photo_" + index_name(i) + ".png";
    save_png(scene.photo, out_dir / rel);
    m.train_x.push_back({rel, seed});
  }
  for (std::int64_t i = 0; i < counts.n_train_y; ++i) {
    const auto seed = scene_seed("scene/y", i);
    auto scene = gen_scene(seed, spec);
    const std::string rel = "trainY/label_" + index_name(i) + ".png";
    save_png(scene.label, out_dir / rel);
    m.train_y.push_back({rel, seed});
  }
  for (std::int64_t i = 0; i < counts.n_val_pairs; ++i) {
    const auto seed = scene_seed("scene/val", i);
    auto scene = gen_scene(seed, spec);
    ValEntry e;
    e.label = "val/label_" + index_name(i) + ".png";
    e.photo = "val/photo_" + index_name(i) + ".png";
    e.class_map = "val/class_map_" + index_name(i) + ".png";
    e.scene_seed = seed;
    save_png(scene.label, out_dir / e.label);
    save_png(scene.photo, out_dir / e.photo);
    // Class indices stored verbatim in all three channels.
    auto idx = scene.class_map.to(torch::kF32);
    auto cm_img = torch::stack({idx, idx, idx}, 0) / 127.5f - 1.0f;
    save_png(cm_img, out_dir / e.class_map);
    m.val.push_back(e);
  }

  m.save(out_dir / "manifest.json");
  return m;
}

// ---------------------------------------------------------------------------
// Dataset loader + unpaired batching
// ---------------------------------------------------------------------------

Dataset::Dataset(DatasetManifest manifest) : manifest_(std::move(manifest)) {}

std::int64_t Dataset::n_train_x() const {
  return static_cast<std::int64_t>(manifest_.train_x.size());
}
std::int64_t Dataset::n_train_y() const {
  return static_cast<std::int64_t>(manifest_.train_y.size());
}
std::int64_t Dataset::n_val() const {
  return static_cast<std::int64_t>(manifest_.val.size());
}

torch::Tensor Dataset::cached(const std::string& rel) const {
  auto it = cache_.find(rel);
  if (it != cache_.end()) return it->second;
  auto t = load_png(manifest_.root_path / rel);
  cache_.emplace(rel, t);
  return t;
}

torch::Tensor Dataset::train_x_photo(std::int64_t i) const {
  return cached(manifest_.train_x.at(static_cast<std::size_t>(i)).file);
}
torch::Tensor Dataset::train_y_label(std::int64_t i) const {
  return cached(manifest_.train_y.at(static_cast<std::size_t>(i)).file);
}
torch::Tensor Dataset::val_label(std::int64_t i) const {
  return cached(manifest_.val.at(static_cast<std::size_t>(i)).label);
}
torch::Tensor Dataset::val_photo(std::int64_t i) const {
  return cached(manifest_.val.at(static_cast<std::size_t>(i)).photo);
}

ClassMap Dataset::val_class_map(std::int64_t i) const {
  auto img = cached(manifest_.val.at(static_cast<std::size_t>(i)).class_map);
  return ((img[0] + 1.0f) * 127.5f).round().to(torch::kLong);
}

std::int64_t steps_per_epoch(const Dataset& dataset, std::int64_t batch_size) {
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  const std::int64_t n = std::min(dataset.n_train_x(), dataset.n_train_y());
  const std::int64_t steps = n / batch_size;
  if (steps < 1) throw config_error("batch_size exceeds dataset size");
  return steps;
}

Batch unpaired_batch(const Dataset& dataset, std::uint64_t split_seed,
                     std::int64_t step, std::int64_t batch_size) {
  const std::int64_t spe = steps_per_epoch(dataset, batch_size);
  const std::int64_t epoch = step / spe;
  const std::int64_t pos = (step % spe) * batch_size;

  auto pick = [&](std::string_view name, std::int64_t domain_size,
                  auto&& fetch) {
    auto perm = Rng::stream(split_seed, name, static_cast<std::uint64_t>(epoch))
                    .permutation(domain_size);
    std::vector<torch::Tensor> images;
    images.reserve(static_cast<std::size_t>(batch_size));
    for (std::int64_t k = 0; k < batch_size; ++k) {
      images.push_back(fetch(perm[static_cast<std::size_t>(pos + k)]));
    }
    return torch::stack(images, 0);
  };

  Batch b;
  b.x = pick("shuffle/x", dataset.n_train_x(),
             [&](std::int64_t i) { return dataset.train_x_photo(i); });
  b.y = pick("shuffle/y", dataset.n_train_y(),
             [&](std::int64_t i) { return dataset.train_y_label(i); });
  return b;
}

ClassMap to_class_map(const torch::Tensor& label_image,
                      const std::vector<Rgb>& palette) {
  TORCH_CHECK(label_image.dim() == 3 && label_image.size(0) == 3,
              "to_class_map expects a 3xHxW image");
  const std::int64_t h = label_image.size(1), w = label_image.size(2);
  const auto k_classes = static_cast<std::int64_t>(palette.size());
  auto img = label_image.to(torch::kF32).contiguous();
  auto acc = img.accessor<float, 3>();

  std::vector<std::array<float, 3>> pal(static_cast<std::size_t>(k_classes));
  for (std::int64_t k = 0; k < k_classes; ++k) {
    for (int c = 0; c < 3; ++c) {
      pal[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] =
          static_cast<float>(palette[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]) /
              127.5f - 1.0f;
    }
  }

  auto out = torch::empty({h, w}, torch::kLong);
  auto oa = out.accessor<std::int64_t, 2>();
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      float best = std::numeric_limits<float>::infinity();
      std::int64_t best_k = 0;
      for (std::int64_t k = 0; k < k_classes; ++k) {
        float d = 0;
        for (int ch = 0; ch < 3; ++ch) {
          const float diff = acc[ch][r][c] -
                             pal[static_cast<std::size_t>(k)][static_cast<std::size_t>(ch)];
          d += diff * diff;
        }
        if (d < best) {  // strict: ties keep the lower class index
          best = d;
          best_k = k;
        }
      }
      oa[r][c] = best_k;
    }
  }
  return out;
}

}  // namespace asymgan
