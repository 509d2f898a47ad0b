#ifndef ASYMGAN_RNG_HPP
#define ASYMGAN_RNG_HPP

#include <torch/torch.h>

#include <cstdint>
#include <string_view>

namespace asymgan {

/// Deterministic splitmix64 counter RNG. Every random quantity in the project
/// flows from a master seed through named substreams, so any component can be
/// replayed in isolation and checkpoint resume needs no generator state beyond
/// the (seed, step) pair it was derived from.
///
/// normal() uses Box-Muller and always consumes two raw draws (the spare is
/// discarded) so the stream has no hidden state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Substream for (master seed, name); an optional index makes per-step or
  /// per-item streams (e.g. stream(seed, "z", step)).
  static Rng stream(std::uint64_t master_seed, std::string_view name,
                    std::uint64_t index = 0);

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // N(0, 1)
  std::int64_t randint(std::int64_t n);    // [0, n)

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::int64_t> permutation(std::int64_t n);

  /// Overwrite a CPU float tensor elementwise, in row-major order.
  void fill_normal(torch::Tensor t, double mean = 0.0, double stddev = 1.0);
  void fill_uniform(torch::Tensor t, double lo, double hi);

  torch::Tensor normal_tensor(torch::IntArrayRef shape,
                              torch::Dtype dtype = torch::kF32);

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace asymgan

#endif
