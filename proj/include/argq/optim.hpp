#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "argq/common.hpp"

namespace argq {

// A flat trainable tensor with its gradient buffer. `touched` marks that a
// gradient was accumulated since the last update; untouched parameters are
// skipped by the optimizer, including weight decay.
struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
  bool touched = false;

  Param() = default;
  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
    touched = false;
  }
};

struct AdamWConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// Adam with decoupled weight decay. Moment buffers are keyed by the position
// of each parameter in the list passed to step(), which must stay fixed.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  const AdamWConfig& config() const { return config_; }

  void step(std::span<Param* const> params, double grad_scale = 1.0) {
    if (first_.size() < params.size()) {
      first_.resize(params.size());
      second_.resize(params.size());
      steps_.resize(params.size(), 0);
    }
    const double lr = config_.learning_rate;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param& p = *params[k];
      if (!p.touched) continue;
      auto& m = first_[k];
      auto& v = second_[k];
      if (m.size() != p.size()) {
        m.assign(p.size(), 0.0);
        v.assign(p.size(), 0.0);
      }
      const long t = ++steps_[k];
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i] * grad_scale;
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        p.value[i] -= lr * config_.weight_decay * p.value[i];
        p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      }
    }
  }

 private:
  AdamWConfig config_;
  std::vector<std::vector<double>> first_, second_;
  std::vector<long> steps_;
};

inline void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace argq
