#pragma once

#include <cmath>
#include <vector>

#include "igae/nn.hpp"
#include "igae/tensor.hpp"

namespace igae {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over one parameter group; moments mirror parameter
// shapes. State is mutated only by step().
template <class T>
class AdamT {
 public:
  explicit AdamT(std::vector<TensorT<T>> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }

  explicit AdamT(const ParamList<T>& params, AdamConfig cfg = {})
      : AdamT(tensors_of(params), cfg) {}

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      auto& p = params_[pi];
      if (p.grad().size() != p.data().size())
        throw std::runtime_error("adam_step: parameter has no gradient");
      auto& m = m_[pi];
      auto& v = v_[pi];
      auto& g = p.grad();
      auto& x = p.data();
      for (size_t i = 0; i < x.size(); ++i) {
        m[i] = static_cast<T>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i]);
        v[i] = static_cast<T>(cfg_.beta2 * v[i] +
                              (1.0 - cfg_.beta2) * g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        x[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  int64_t step_count() const { return t_; }
  const std::vector<TensorT<T>>& params() const { return params_; }

 private:
  static std::vector<TensorT<T>> tensors_of(const ParamList<T>& named) {
    std::vector<TensorT<T>> out;
    out.reserve(named.size());
    for (const auto& np : named) out.push_back(np.tensor);
    return out;
  }

  std::vector<TensorT<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
  AdamConfig cfg_;
};

using Adam = AdamT<float>;

// rate(t) = base * xi * gamma^(epoch_offset + floor(t / steps_per_epoch))
struct Schedule {
  double base = 1e-3;
  double xi = 1.0;
  double gamma = 1.0;
  int steps_per_epoch = 1;
  int64_t epoch_offset = 0;

  double rate(int64_t step) const {
    const int64_t epoch = epoch_offset + step / steps_per_epoch;
    const double r = base * xi * std::pow(gamma, static_cast<double>(epoch));
    if (!(r > 0.0))
      throw std::runtime_error("schedule produced a non-positive rate");
    return r;
  }
};

}  // namespace igae
