#include "psoctseg/nn/optim.hpp"

#include <cmath>

namespace psoctseg::nn {

RMSprop::RMSprop(std::vector<Parameter<float>*> params, Options opt) : params_(std::move(params)), opt_(opt) {
  ms_.reserve(params_.size());
  for (const auto* p : params_) ms_.emplace_back(p->size(), 0.0f);
}

void RMSprop::step() {
  const float rho = static_cast<float>(opt_.rho);
  const float lr = static_cast<float>(opt_.lr);
  const float eps = static_cast<float>(opt_.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& ms = ms_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float g = p.grad[i];
      ms[i] = rho * ms[i] + (1.0f - rho) * g * g;
      p.value[i] -= lr * g / (std::sqrt(ms[i]) + eps);
    }
  }
}

void RMSprop::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace psoctseg::nn
