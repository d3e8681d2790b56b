#pragma once

#include <vector>

#include "psoctseg/nn/layers.hpp"

namespace psoctseg::nn {

/// RMSprop without momentum:
///   ms = rho * ms + (1 - rho) * g^2
///   p -= lr * g / (sqrt(ms) + eps)
class RMSprop {
 public:
  struct Options {
    double lr = 1e-3;
    double rho = 0.9;
    double eps = 1e-7;
  };

  RMSprop(std::vector<Parameter<float>*> params, Options opt);

  void step();
  void zero_grad();
  [[nodiscard]] const Options& options() const { return opt_; }

 private:
  std::vector<Parameter<float>*> params_;
  std::vector<std::vector<float>> ms_;
  Options opt_;
};

}  // namespace psoctseg::nn
