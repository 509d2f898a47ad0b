#include "asymgan/optim.hpp"

#include <cmath>
#include <map>

#include "asymgan/common.hpp"

namespace asymgan {

Adam::Adam(std::vector<torch::Tensor> params, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  torch::NoGradGuard guard;
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(torch::zeros_like(p));
    v_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void Adam::step(double lr) {
  torch::NoGradGuard guard;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.grad().defined()) continue;
    auto g = p.grad();
    m_[i].mul_(beta1_).add_(g, 1.0 - beta1_);
    v_[i].mul_(beta2_).addcmul_(g, g, 1.0 - beta2_);
    auto m_hat = m_[i] / bc1;
    auto v_hat = v_[i] / bc2;
    p.add_(m_hat / (v_hat.sqrt() + eps_), -lr);
  }
}

std::vector<std::pair<std::string, torch::Tensor>> Adam::named_state(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(prefix + "/" + std::to_string(i) + "/m", m_[i]);
    out.emplace_back(prefix + "/" + std::to_string(i) + "/v", v_[i]);
  }
  return out;
}

void Adam::restore(const std::string& prefix,
                   const std::map<std::string, torch::Tensor>& tensors,
                   std::int64_t step_count) {
  torch::NoGradGuard guard;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto mk = prefix + "/" + std::to_string(i) + "/m";
    const auto vk = prefix + "/" + std::to_string(i) + "/v";
    auto mi = tensors.find(mk);
    auto vi = tensors.find(vk);
    if (mi == tensors.end() || vi == tensors.end()) {
      throw format_error("optimizer state missing tensor " + mk);
    }
    m_[i].copy_(mi->second);
    v_[i].copy_(vi->second);
  }
  t_ = step_count;
}

}  // namespace asymgan
