#pragma once

#include "igae/fields.hpp"
#include "igae/geometry.hpp"
#include "igae/image.hpp"
#include "igae/ops.hpp"

namespace igae {

// Background per channel kind: RGB composites over constant white, latent
// rendering over a learnable per-channel vector.
template <class T>
struct BackgroundModelT {
  TensorT<T> values;  // [C]; leaf, trainable for the latent kind
  ChannelKind kind = ChannelKind::rgb;

  static BackgroundModelT white_rgb() {
    return {TensorT<T>::filled({3}, T(1)), ChannelKind::rgb};
  }
  static BackgroundModelT latent(TensorT<T> beta) {
    return {std::move(beta), ChannelKind::latent};
  }
};

template <class T>
struct RenderedImageT {
  TensorT<T> values;       // [C,h,w], wired into the graph
  std::vector<T> weights;  // h*w accumulated opacity (1 - final transmittance)
  ChannelKind kind = ChannelKind::rgb;
  int rays_issued = 0;
  int64_t field_queries = 0;

  Image to_image() const {
    const Shape& s = values.shape();
    Image img(s[0], s[1], s[2]);
    std::copy(values.data().begin(), values.data().end(), img.data.begin());
    return img;
  }
};

// Composite a single ray (the batched form is composite_rays).
template <class T>
TensorT<T> composite_ray(const TensorT<T>& sigma, const TensorT<T>& channels,
                         const TensorT<T>& deltas, const TensorT<T>& bg) {
  const int S = sigma.shape().empty() ? 1 : sigma.shape()[0];
  const int C = bg.shape()[0];
  auto out = composite_rays(reshape(sigma, {1, S}),
                            reshape(channels, {1, S, C}),
                            reshape(deltas, {1, S}), bg);
  return reshape(out, {C});
}

// Render every pixel of an h x w grid independently: h*w rays, S samples
// each, exactly h*w*S field queries.
template <class T>
RenderedImageT<T> render_image(const FieldFnT<T>& field,
                               const CameraPose& pose, int h, int w, int S,
                               const BackgroundModelT<T>& bg, Rng& rng,
                               bool jitter, double near, double far) {
  if (field.kind != bg.kind)
    throw std::invalid_argument("render_image: field/background kind mismatch");
  if (field.channels != bg.values.shape()[0])
    throw std::invalid_argument("render_image: field has " +
                                std::to_string(field.channels) +
                                " channels, background " +
                                shape_str(bg.values.shape()));
  RaySet rays = generate_rays(pose, h, w, near, far);
  DepthSamples ds = sample_stratified(rays, S, rng, jitter);
  const int n = rays.count();

  std::vector<T> pts(static_cast<size_t>(n) * S * 3);
  std::vector<T> deltas(static_cast<size_t>(n) * S);
  for (int i = 0; i < n; ++i) {
    const Vec3 o = rays.origins[i];
    const Vec3 d = rays.directions[i];
    for (int s = 0; s < S; ++s) {
      const double t = ds.t[static_cast<size_t>(i) * S + s];
      const size_t k = (static_cast<size_t>(i) * S + s) * 3;
      pts[k + 0] = static_cast<T>(o.x + t * d.x);
      pts[k + 1] = static_cast<T>(o.y + t * d.y);
      pts[k + 2] = static_cast<T>(o.z + t * d.z);
      deltas[static_cast<size_t>(i) * S + s] =
          static_cast<T>(ds.deltas[static_cast<size_t>(i) * S + s]);
    }
  }

  auto pts_t = TensorT<T>::from_data({n * S, 3}, std::move(pts));
  auto [sigma, ch] = field.query(pts_t);
  auto sigma_rays = reshape(sigma, {n, S});
  auto ch_rays = reshape(ch, {n, S, field.channels});
  auto deltas_t = TensorT<T>::from_data({n, S}, std::move(deltas));
  auto out = composite_rays(sigma_rays, ch_rays, deltas_t, bg.values);

  RenderedImageT<T> result;
  result.values = reshape(transpose2d(out), {field.channels, h, w});
  result.weights = accumulated_opacity(sigma_rays.data(), deltas_t.data(), n, S);
  result.kind = field.kind;
  result.rays_issued = n;
  result.field_queries = static_cast<int64_t>(n) * S;
  return result;
}

}  // namespace igae
