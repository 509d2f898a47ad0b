#ifndef ASYMGAN_OPTIM_HPP
#define ASYMGAN_OPTIM_HPP

#include <torch/torch.h>

#include <string>
#include <vector>

namespace asymgan {

/// Adam with the reference GAN betas. Self-owned state so checkpoints can
/// serialize it as plain named tensors.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, double beta1 = 0.5,
       double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step(double lr);

  /// Moment tensors, named "<prefix>/<i>/m|v", plus scalar step count.
  std::vector<std::pair<std::string, torch::Tensor>> named_state(
      const std::string& prefix) const;
  std::int64_t step_count() const { return t_; }
  void restore(const std::string& prefix,
               const std::map<std::string, torch::Tensor>& tensors,
               std::int64_t step_count);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace asymgan

#endif
