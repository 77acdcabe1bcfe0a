#pragma once

#include <string>
#include <vector>

#include "igae/tensor.hpp"

namespace igae {

template <class T>
struct NamedParam {
  std::string name;
  TensorT<T> tensor;
};

template <class T>
using ParamList = std::vector<NamedParam<T>>;

// Kaiming-uniform fan-in bound with relu-family gain: sqrt(6 / fan_in).
template <class T>
TensorT<T> kaiming_uniform(Shape shape, int fan_in, Rng& rng,
                           bool requires_grad = true) {
  const T bound = static_cast<T>(std::sqrt(6.0 / fan_in));
  return TensorT<T>::uniform(std::move(shape), rng, -bound, bound,
                             requires_grad);
}

// Dense stack; SiLU between layers, raw output on the last one.
template <class T>
struct MlpT {
  struct Layer {
    TensorT<T> w;  // [in,out]
    TensorT<T> b;  // [out]
  };
  std::vector<Layer> layers;

  static MlpT make(const std::vector<int>& widths, Rng& rng,
                   bool trainable = true, bool zero_init = false) {
    MlpT m;
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
      const int in = widths[i], out = widths[i + 1];
      Layer l;
      l.w = zero_init ? TensorT<T>::zeros({in, out}, trainable)
                      : kaiming_uniform<T>({in, out}, in, rng, trainable);
      l.b = TensorT<T>::zeros({out}, trainable);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    TensorT<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = linear(h, layers[i].w, layers[i].b);
      if (i + 1 < layers.size()) h = silu(h);
    }
    return h;
  }

  int in_dim() const { return layers.front().w.shape()[0]; }
  int out_dim() const { return layers.back().w.shape()[1]; }

  void collect_params(const std::string& prefix, ParamList<T>& out) const {
    for (size_t i = 0; i < layers.size(); ++i) {
      out.push_back({prefix + ".l" + std::to_string(i) + ".w", layers[i].w});
      out.push_back({prefix + ".l" + std::to_string(i) + ".b", layers[i].b});
    }
  }

  MlpT clone(bool trainable) const {
    MlpT m;
    for (const auto& l : layers)
      m.layers.push_back({l.w.detach(trainable), l.b.detach(trainable)});
    return m;
  }
};

}  // namespace igae
