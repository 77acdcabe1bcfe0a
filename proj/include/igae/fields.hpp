#pragma once

#include <array>
#include <functional>
#include <utility>

#include "igae/nn.hpp"
#include "igae/ops.hpp"

namespace igae {

enum class ChannelKind { rgb, latent };

// Three axis-aligned feature planes (xy, xz, yz), each [F,K,K], over the
// cube [-bounds, bounds]^3.
template <class T>
struct TriPlaneT {
  std::array<TensorT<T>, 3> planes;
  double bounds = 1.0;

  static TriPlaneT make(int resolution, int features, double bounds, Rng& rng,
                        T init_scale = T(0.1)) {
    TriPlaneT tp;
    tp.bounds = bounds;
    for (auto& p : tp.planes)
      p = TensorT<T>::uniform({features, resolution, resolution}, rng,
                              -init_scale, init_scale, true);
    return tp;
  }

  int features() const { return planes[0].shape()[0]; }
  int resolution() const { return planes[0].shape()[1]; }

  void collect_params(const std::string& prefix, ParamList<T>& out) const {
    static const char* kNames[3] = {"xy", "xz", "yz"};
    for (int i = 0; i < 3; ++i)
      out.push_back({prefix + ".plane_" + kNames[i], planes[i]});
  }
};

// Shared renderer head: summed plane features -> (density logit, C channels).
// Two hidden layers of width 64, SiLU.
template <class T>
struct FeatureDecoderT {
  MlpT<T> mlp;
  int channels = 0;
  ChannelKind kind = ChannelKind::latent;

  static FeatureDecoderT make(int features, int channels, ChannelKind kind,
                              Rng& rng, bool zero_init = false) {
    FeatureDecoderT d;
    d.mlp = MlpT<T>::make({features, 64, 64, 1 + channels}, rng, true,
                          zero_init);
    d.channels = channels;
    d.kind = kind;
    // bias the density head toward empty space at init
    if (!zero_init) d.mlp.layers.back().b.data()[0] = T(-1);
    return d;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) const {
    mlp.collect_params(prefix, out);
  }
};

namespace detail {

// Mask rows whose point lies outside the axis-aligned bounding cube, so
// out-of-bounds points contribute nothing to any pixel.
template <class T>
std::pair<TensorT<T>, TensorT<T>> bounds_masks(const TensorT<T>& pts,
                                               double bounds, int channels) {
  const int n = pts.shape()[0];
  std::vector<T> m(n), mc(static_cast<size_t>(n) * channels);
  const auto& pv = pts.data();
  for (int i = 0; i < n; ++i) {
    const bool inside = std::abs(pv[3 * i + 0]) <= bounds &&
                        std::abs(pv[3 * i + 1]) <= bounds &&
                        std::abs(pv[3 * i + 2]) <= bounds;
    m[i] = inside ? T(1) : T(0);
    for (int c = 0; c < channels; ++c) mc[i * channels + c] = m[i];
  }
  return {TensorT<T>::from_data({n}, std::move(m)),
          TensorT<T>::from_data({n, channels}, std::move(mc))};
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> head_split(const TensorT<T>& raw,
                                             int channels, ChannelKind kind) {
  const int n = raw.shape()[0];
  auto sigma = softplus(reshape(slice_last(raw, 0, 1), {n}));
  auto ch = slice_last(raw, 1, channels);
  if (kind == ChannelKind::rgb) ch = sigmoid(ch);
  return {std::move(sigma), std::move(ch)};
}

}  // namespace detail

// Summed bilinear plane features at pts[n,3]; linear in the plane values.
template <class T>
TensorT<T> triplane_features(const TriPlaneT<T>& tp, const TensorT<T>& pts) {
  if (pts.shape().size() != 2 || pts.shape()[1] != 3)
    throw std::invalid_argument("triplane_features: expected pts[n,3], got " +
                                shape_str(pts.shape()));
  const T inv_b = static_cast<T>(1.0 / tp.bounds);
  auto pn = scale(pts, inv_b);
  auto x = slice_last(pn, 0, 1);
  auto y = slice_last(pn, 1, 1);
  auto z = slice_last(pn, 2, 1);
  auto f_xy = grid_sample_bilinear(tp.planes[0],
                                   concat_last(std::vector<TensorT<T>>{x, y}));
  auto f_xz = grid_sample_bilinear(tp.planes[1],
                                   concat_last(std::vector<TensorT<T>>{x, z}));
  auto f_yz = grid_sample_bilinear(tp.planes[2],
                                   concat_last(std::vector<TensorT<T>>{y, z}));
  return add(add(f_xy, f_xz), f_yz);
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> query_triplane(const TriPlaneT<T>& tp,
                                                 const FeatureDecoderT<T>& dec,
                                                 const TensorT<T>& pts) {
  if (dec.mlp.out_dim() != 1 + dec.channels)
    throw std::invalid_argument(
        "query_triplane: decoder head size " +
        std::to_string(dec.mlp.out_dim()) + " does not match 1+" +
        std::to_string(dec.channels) + " channels");
  if (dec.mlp.in_dim() != tp.features())
    throw std::invalid_argument("query_triplane: decoder expects " +
                                std::to_string(dec.mlp.in_dim()) +
                                " features, plane has " +
                                std::to_string(tp.features()));
  auto feats = triplane_features(tp, pts);
  auto [sigma, ch] = detail::head_split(dec.mlp.forward(feats), dec.channels,
                                        dec.kind);
  auto [m, mc] = detail::bounds_masks<T>(pts, tp.bounds, dec.channels);
  return {mul(sigma, m), mul(ch, mc)};
}

// Generic MLP field with sinusoidal positional encoding
// gamma(x) = (x, sin(2^k pi x), cos(2^k pi x))_{k < pe_order}, encoded on
// coordinates normalized by bounds. Four hidden layers of width 128.
template <class T>
struct MlpFieldT {
  MlpT<T> mlp;
  int pe_order = 4;
  int channels = 0;
  ChannelKind kind = ChannelKind::latent;
  double bounds = 1.0;

  static MlpFieldT make(int pe_order, int channels, ChannelKind kind,
                        double bounds, Rng& rng) {
    MlpFieldT f;
    f.pe_order = pe_order;
    f.channels = channels;
    f.kind = kind;
    f.bounds = bounds;
    const int enc = 3 + 6 * pe_order;
    f.mlp = MlpT<T>::make({enc, 128, 128, 128, 128, 1 + channels}, rng);
    f.mlp.layers.back().b.data()[0] = T(-1);
    return f;
  }

  int encoding_dim() const { return 3 + 6 * pe_order; }

  void collect_params(const std::string& prefix, ParamList<T>& out) const {
    mlp.collect_params(prefix, out);
  }
};

template <class T>
TensorT<T> positional_encoding(const TensorT<T>& pts_normalized, int order) {
  std::vector<TensorT<T>> parts{pts_normalized};
  constexpr double kPi = 3.14159265358979323846;
  for (int k = 0; k < order; ++k) {
    const T f = static_cast<T>(kPi * std::pow(2.0, k));
    auto s = scale(pts_normalized, f);
    parts.push_back(sin(s));
    parts.push_back(cos(s));
  }
  return concat_last(parts);
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> query_mlp_field(const MlpFieldT<T>& f,
                                                  const TensorT<T>& pts) {
  if (pts.shape().size() != 2 || pts.shape()[1] != 3)
    throw std::invalid_argument("query_mlp_field: expected pts[n,3], got " +
                                shape_str(pts.shape()));
  if (f.mlp.out_dim() != 1 + f.channels)
    throw std::invalid_argument("query_mlp_field: head size " +
                                std::to_string(f.mlp.out_dim()) +
                                " does not match 1+" +
                                std::to_string(f.channels) + " channels");
  auto pn = scale(pts, static_cast<T>(1.0 / f.bounds));
  auto enc = positional_encoding(pn, f.pe_order);
  auto [sigma, ch] = detail::head_split(f.mlp.forward(enc), f.channels, f.kind);
  auto [m, mc] = detail::bounds_masks<T>(pts, f.bounds, f.channels);
  return {mul(sigma, m), mul(ch, mc)};
}

// Renderer-facing view of any field backend.
template <class T>
struct FieldFnT {
  std::function<std::pair<TensorT<T>, TensorT<T>>(const TensorT<T>&)> query;
  int channels = 0;
  ChannelKind kind = ChannelKind::latent;
};

template <class T>
FieldFnT<T> field_fn(const TriPlaneT<T>& tp, const FeatureDecoderT<T>& dec) {
  return {[&tp, &dec](const TensorT<T>& pts) {
            return query_triplane(tp, dec, pts);
          },
          dec.channels, dec.kind};
}

template <class T>
FieldFnT<T> field_fn(const MlpFieldT<T>& f) {
  return {[&f](const TensorT<T>& pts) { return query_mlp_field(f, pts); },
          f.channels, f.kind};
}

}  // namespace igae
