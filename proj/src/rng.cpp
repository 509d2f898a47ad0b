#include "asymgan/rng.hpp"

#include <cmath>
#include <numbers>

#include "asymgan/common.hpp"

namespace asymgan {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Rng Rng::stream(std::uint64_t master_seed, std::string_view name,
                std::uint64_t index) {
  std::uint64_t s = master_seed;
  s = splitmix64(s) ^ fnv1a(name);
  s = splitmix64(s) ^ (index * 0x9E3779B97F4A7C15ULL);
  splitmix64(s);
  return Rng(s);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite; the second Box-Muller value is dropped.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::randint(std::int64_t n) {
  if (n <= 0) throw config_error("randint: n must be positive");
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t un = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::int64_t>(x % un);
}

std::vector<std::int64_t> Rng::permutation(std::int64_t n) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i) {
    std::int64_t j = randint(i + 1);
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

namespace {

template <typename Scalar, typename Draw>
void fill_with(torch::Tensor& t, Draw&& draw) {
  auto flat = t.view(-1);
  auto acc = flat.accessor<Scalar, 1>();
  const std::int64_t n = flat.size(0);
  for (std::int64_t i = 0; i < n; ++i) {
    acc[i] = static_cast<Scalar>(draw());
  }
}

}  // namespace

void Rng::fill_normal(torch::Tensor t, double mean, double stddev) {
  TORCH_CHECK(t.device().is_cpu(), "fill_normal: CPU tensors only");
  auto c = t.contiguous();
  auto draw = [&] { return mean + stddev * normal(); };
  if (c.scalar_type() == torch::kF32) {
    fill_with<float>(c, draw);
  } else if (c.scalar_type() == torch::kF64) {
    fill_with<double>(c, draw);
  } else {
    throw config_error("fill_normal: unsupported dtype");
  }
  if (!c.is_same(t)) t.copy_(c);
}

void Rng::fill_uniform(torch::Tensor t, double lo, double hi) {
  TORCH_CHECK(t.device().is_cpu(), "fill_uniform: CPU tensors only");
  auto c = t.contiguous();
  auto draw = [&] { return uniform(lo, hi); };
  if (c.scalar_type() == torch::kF32) {
    fill_with<float>(c, draw);
  } else if (c.scalar_type() == torch::kF64) {
    fill_with<double>(c, draw);
  } else {
    throw config_error("fill_uniform: unsupported dtype");
  }
  if (!c.is_same(t)) t.copy_(c);
}

torch::Tensor Rng::normal_tensor(torch::IntArrayRef shape, torch::Dtype dtype) {
  auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
  fill_normal(t);
  return t;
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::baseline_cyclegan: return "baseline";
    case Mode::asym_no_ext: return "asym";
    case Mode::asym_ext: return "asym-ext";
  }
  throw config_error("unknown mode");
}

Mode mode_from_string(const std::string& s) {
  if (s == "baseline") return Mode::baseline_cyclegan;
  if (s == "asym") return Mode::asym_no_ext;
  if (s == "asym-ext") return Mode::asym_ext;
  throw config_error("unknown mode: " + s);
}

}  // namespace asymgan
