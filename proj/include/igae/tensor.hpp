#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "igae/rng.hpp"

namespace igae {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Reverse-mode tape node. The graph is rebuilt every step (define-by-run);
// backward_fn reads this node's grad and accumulates into the parents'.
template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;  // empty for leaves

  bool is_leaf() const { return !backward_fn; }
};

// Value-semantic handle onto a graph node. Copies share the node.
template <class T>
class TensorT {
 public:
  using Node = TensorNode<T>;
  using Scalar = T;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static TensorT filled(Shape shape, T v, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(shape_numel(n->shape)), v);
    set_rg(*n, requires_grad);
    return TensorT(std::move(n));
  }

  static TensorT from_data(Shape shape, std::vector<T> data,
                           bool requires_grad = false) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("tensor data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    set_rg(*n, requires_grad);
    return TensorT(std::move(n));
  }

  static TensorT scalar(T v, bool requires_grad = false) {
    return from_data({}, {v}, requires_grad);
  }

  static TensorT uniform(Shape shape, Rng& rng, T lo, T hi,
                         bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->value) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  static TensorT randn(Shape shape, Rng& rng, T stddev = T(1),
                       bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->value) v = static_cast<T>(rng.normal() * stddev);
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  bool defined() const { return static_cast<bool>(node_); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("item() on non-scalar tensor of shape " +
                                  shape_str(shape()));
    return node_->value[0];
  }

  void zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // Leaf copy of the current values, cut off from the graph.
  TensorT detach(bool requires_grad = false) const {
    return from_data(shape(), node_->value, requires_grad);
  }

  std::shared_ptr<Node> node() const { return node_; }

  // Reverse pass from a scalar. Leaf grads accumulate across calls;
  // interior grads are recomputed from scratch each call.
  void backward() const {
    if (numel() != 1)
      throw std::invalid_argument(
          "backward() requires a scalar loss, got shape " +
          shape_str(shape()));
    if (!node_->requires_grad) return;

    // Iterative topological order over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node* p = n->parents[idx++].get();
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    for (Node* n : order) {
      if (n->grad.empty()) n->grad.assign(n->value.size(), T(0));
      if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), T(0));
    }
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

  static void set_rg(Node& n, bool rg) {
    n.requires_grad = rg;
    if (rg && n.grad.empty()) n.grad.assign(n.value.size(), T(0));
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;  // 64-bit mode, used by gradient checks

namespace detail {

template <class T>
std::shared_ptr<TensorNode<T>> make_result(
    Shape shape, std::vector<std::shared_ptr<TensorNode<T>>> parents) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(shape_numel(n->shape)), T(0));
  n->parents = std::move(parents);
  bool rg = false;
  for (auto& p : n->parents) rg = rg || p->requires_grad;
  n->requires_grad = rg;
  return n;
}

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b,
                      const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T stable_softplus(T x) {
  if (x > T(20)) return x;
  return std::log1p(std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary (identical shapes)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto n = detail::make_result<T>(a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] + bv[i];
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      for (int k = 0; k < 2; ++k) {
        auto& p = *self.parents[k];
        if (!p.requires_grad) continue;
        for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
      }
    };
  return TensorT<T>(n);
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto n = detail::make_result<T>(a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] - bv[i];
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          pa.grad[i] += self.grad[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          pb.grad[i] -= self.grad[i];
    };
  return TensorT<T>(n);
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto n = detail::make_result<T>(a.shape(), {a.node(), b.node()});
  const auto& av = a.data();
  const auto& bv = b.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] * bv[i];
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          pb.grad[i] += self.grad[i] * pa.value[i];
    };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Tensor-scalar broadcasts
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  auto n = detail::make_result<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] * s;
  if (n->requires_grad)
    n->backward_fn = [s](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (size_t i = 0; i < self.grad.size(); ++i)
        p.grad[i] += self.grad[i] * s;
    };
  return TensorT<T>(n);
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
  auto n = detail::make_result<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] + s;
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

namespace detail {

// fwd(x) -> y, bwd(x, y) -> dy/dx
template <class T, class Fwd, class Bwd>
TensorT<T> unary_op(const TensorT<T>& a, Fwd fwd, Bwd bwd) {
  auto n = make_result<T>(a.shape(), {a.node()});
  const auto& av = a.data();
  for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = fwd(av[i]);
  if (n->requires_grad)
    n->backward_fn = [bwd](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (size_t i = 0; i < self.grad.size(); ++i)
        p.grad[i] += self.grad[i] * bwd(p.value[i], self.value[i]);
    };
  return TensorT<T>(n);
}

}  // namespace detail

template <class T>
TensorT<T> exp(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
TensorT<T> square(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
TensorT<T> relu(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return detail::stable_sigmoid(x); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
TensorT<T> softplus(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return detail::stable_softplus(x); },
      [](T x, T) { return detail::stable_sigmoid(x); });
}

template <class T>
TensorT<T> silu(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x * detail::stable_sigmoid(x); },
      [](T x, T) {
        T s = detail::stable_sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <class T>
TensorT<T> sin(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

template <class T>
TensorT<T> cos(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

// ---------------------------------------------------------------------------
// Reductions (full-tensor, rank-0 result)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> sum(const TensorT<T>& a) {
  auto n = detail::make_result<T>({}, {a.node()});
  T acc = T(0);
  for (T v : a.data()) acc += v;
  n->value[0] = acc;
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      T g = self.grad[0];
      for (auto& pg : p.grad) pg += g;
    };
  return TensorT<T>(n);
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
  auto n = detail::make_result<T>({}, {a.node()});
  T acc = T(0);
  for (T v : a.data()) acc += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  n->value[0] = acc * inv;
  if (n->requires_grad)
    n->backward_fn = [inv](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      T g = self.grad[0] * inv;
      for (auto& pg : p.grad) pg += g;
    };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> reshape(const TensorT<T>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(a.shape()) + " as " +
                                shape_str(new_shape));
  auto n = detail::make_result<T>(std::move(new_shape), {a.node()});
  n->value = a.data();
  if (n->requires_grad)
    n->backward_fn = [](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
  return TensorT<T>(n);
}

// 2-D transpose: [m,n] -> [n,m]
template <class T>
TensorT<T> transpose2d(const TensorT<T>& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("transpose2d: expected rank-2, got " +
                                shape_str(a.shape()));
  const int m = a.shape()[0], k = a.shape()[1];
  auto n = detail::make_result<T>({k, m}, {a.node()});
  const auto& av = a.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) n->value[j * m + i] = av[i * k + j];
  if (n->requires_grad)
    n->backward_fn = [m, k](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
          p.grad[i * k + j] += self.grad[j * m + i];
    };
  return TensorT<T>(n);
}

// Concatenate along the last axis; all other extents must agree.
template <class T>
TensorT<T> concat_last(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  int total_last = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  for (const auto& p : parts) {
    Shape pl = p.shape();
    int last = pl.back();
    pl.pop_back();
    if (pl != lead)
      throw std::invalid_argument("concat_last: leading extents differ: " +
                                  shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    total_last += last;
    parents.push_back(p.node());
  }
  Shape out_shape = lead;
  out_shape.push_back(total_last);
  auto n = detail::make_result<T>(out_shape, std::move(parents));
  const int64_t rows = shape_numel(lead);
  std::vector<int> lasts;
  for (const auto& p : parts) lasts.push_back(p.shape().back());
  for (int64_t r = 0; r < rows; ++r) {
    int64_t off = r * total_last;
    for (size_t k = 0; k < parts.size(); ++k) {
      const auto& pv = parts[k].data();
      const int w = lasts[k];
      std::copy_n(pv.begin() + r * w, w, n->value.begin() + off);
      off += w;
    }
  }
  if (n->requires_grad)
    n->backward_fn = [rows, total_last, lasts](TensorNode<T>& self) {
      for (int64_t r = 0; r < rows; ++r) {
        int64_t off = r * total_last;
        for (size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = *self.parents[k];
          const int w = lasts[k];
          if (p.requires_grad)
            for (int j = 0; j < w; ++j)
              p.grad[r * w + j] += self.grad[off + j];
          off += w;
        }
      }
    };
  return TensorT<T>(n);
}

// Slice [start, start+len) along the last axis.
template <class T>
TensorT<T> slice_last(const TensorT<T>& a, int start, int len) {
  const Shape& s = a.shape();
  if (s.empty() || start < 0 || len < 1 || start + len > s.back())
    throw std::invalid_argument("slice_last: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") invalid for shape " + shape_str(s));
  Shape out = s;
  out.back() = len;
  auto n = detail::make_result<T>(out, {a.node()});
  const int w = s.back();
  const int64_t rows = a.numel() / w;
  const auto& av = a.data();
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(av.begin() + r * w + start, len, n->value.begin() + r * len);
  if (n->requires_grad)
    n->backward_fn = [rows, w, start, len](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < len; ++j)
          p.grad[r * w + start + j] += self.grad[r * len + j];
    };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// linear: y = x W + b
// ---------------------------------------------------------------------------

namespace detail {

// C[m,n] += A[m,k] B[k,n]; fixed accumulation order per element.
template <class T>
void gemm_acc(const T* A, const T* B, T* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<int64_t>(i) * K;
    T* c = C + static_cast<int64_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + static_cast<int64_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// dot with eight fixed-order partial accumulators so the compiler can
// vectorize without reassociating on its own
template <class T>
T dot_unrolled(const T* a, const T* b, int n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int k = 0;
  for (; k + 8 <= n; k += 8)
    for (int u = 0; u < 8; ++u) acc[u] += a[k + u] * b[k + u];
  T tail = T(0);
  for (; k < n; ++k) tail += a[k] * b[k];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// C[m,n] += A[m,k] B[n,k]^T  (B given row-major as [n,k])
template <class T>
void gemm_nt_acc(const T* A, const T* B, T* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<int64_t>(i) * K;
    T* c = C + static_cast<int64_t>(i) * N;
    for (int j = 0; j < N; ++j)
      c[j] += dot_unrolled(a, B + static_cast<int64_t>(j) * K, K);
  }
}

// C[k,n] += A[m,k]^T B[m,n]
template <class T>
void gemm_tn_acc(const T* A, const T* B, T* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<int64_t>(i) * K;
    const T* b = B + static_cast<int64_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      T* c = C + static_cast<int64_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace detail

template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w,
                  const TensorT<T>& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const Shape& bs = b.shape();
  if (xs.size() != 2 || ws.size() != 2 || bs.size() != 1)
    throw std::invalid_argument("linear: expected x[n,in] w[in,out] b[out], "
                                "got " + shape_str(xs) + " " + shape_str(ws) +
                                " " + shape_str(bs));
  if (xs[1] != ws[0] || ws[1] != bs[0])
    throw std::invalid_argument("linear: dimension mismatch " + shape_str(xs) +
                                " x " + shape_str(ws) + " + " + shape_str(bs));
  const int m = xs[0], k = xs[1], n = ws[1];
  auto out = detail::make_result<T>({m, n}, {x.node(), w.node(), b.node()});
  const auto& bv = b.data();
  for (int i = 0; i < m; ++i)
    std::copy(bv.begin(), bv.end(), out->value.begin() + static_cast<int64_t>(i) * n);
  detail::gemm_acc(x.data().data(), w.data().data(), out->value.data(), m, k,
                   n);
  if (out->requires_grad)
    out->backward_fn = [m, k, n](TensorNode<T>& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      auto& pb = *self.parents[2];
      const T* dy = self.grad.data();
      if (px.requires_grad)
        detail::gemm_nt_acc(dy, pw.value.data(), px.grad.data(), m, n, k);
      if (pw.requires_grad)
        detail::gemm_tn_acc(px.value.data(), dy, pw.grad.data(), m, k, n);
      if (pb.requires_grad)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            pb.grad[j] += dy[static_cast<int64_t>(i) * n + j];
    };
  return TensorT<T>(out);
}

template <class T>
TensorT<T> matmul(const TensorT<T>& x, const TensorT<T>& w) {
  return linear(x, w, TensorT<T>::zeros({w.shape()[1]}));
}

// Convenience compositions used by every loss term.
template <class T>
TensorT<T> mse(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mse");
  return mean(square(sub(a, b)));
}

}  // namespace igae
