#pragma once

#include <vector>

#include "periq/model.hpp"

namespace periq {

// SGD with classical momentum: v <- mu*v + g; w <- w - lr*v. Grads are zeroed
// after each step. All arithmetic in f32 to keep step results reproducible.
class SgdOptimizer {
 public:
  SgdOptimizer(float learning_rate, float momentum)
      : lr_(learning_rate), momentum_(momentum) {}

  void step(std::vector<WeightSlab>& slabs) {
    if (velocity_.size() != slabs.size()) {
      velocity_.clear();
      for (const auto& s : slabs) velocity_.push_back(Tensor::zeros_like(s.tensor));
    }
    for (std::size_t si = 0; si < slabs.size(); ++si) {
      Tensor& v = velocity_[si];
      Tensor& w = slabs[si].tensor;
      Tensor& g = slabs[si].grad;
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i];
        w[i] -= lr_ * v[i];
      }
      g.zero();
    }
  }

  float learning_rate() const { return lr_; }
  float momentum() const { return momentum_; }

 private:
  float lr_;
  float momentum_;
  std::vector<Tensor> velocity_;
};

}  // namespace periq
