#pragma once

#include <vector>

#include "igae/autoencoder.hpp"
#include "igae/fields.hpp"
#include "igae/ops.hpp"

namespace igae {

// Term weights; defaults mirror the training hyperparameter table.
struct LossWeights {
  double latent = 1.0;
  double rgb = 1.0;
  double tv3d = 1e-4;
  double ae_synth = 0.1;
  double ae_real = 0.1;
  double perceptual = 0.1;
  double tv_latent = 1e-4;

  void validate() const {
    for (double v : {latent, rgb, tv3d, ae_synth, ae_real, perceptual,
                     tv_latent})
      if (v < 0.0)
        throw std::invalid_argument("loss weights must be nonnegative");
  }
};

// Frozen random conv stack standing in for a pretrained feature network:
// three stride-2 stages of widths 16/32/64, parameters fixed by seed and
// never trained.
template <class T>
struct PerceptualProxyT {
  std::vector<ConvLayerT<T>> stages;
  std::vector<double> stage_weights{1.0, 1.0, 1.0};
  uint64_t seed = 0;

  static PerceptualProxyT make(uint64_t seed) {
    Rng rng(Rng(seed).derive("perceptual-proxy").next_u64());
    PerceptualProxyT p;
    p.seed = seed;
    const int widths[3] = {16, 32, 64};
    int prev = 3;
    for (int w : widths) {
      p.stages.push_back(
          ConvLayerT<T>::make(prev, w, 3, 2, 1, rng, /*trainable=*/false));
      prev = w;
    }
    return p;
  }

  std::vector<TensorT<T>> features(const TensorT<T>& img) const {
    std::vector<TensorT<T>> out;
    TensorT<T> h = img;
    for (const auto& s : stages) {
      h = silu(s.forward(h));
      out.push_back(h);
    }
    return out;
  }
};

// Mean over stages of the mse between channel-normalized feature maps.
template <class T>
TensorT<T> perceptual(const PerceptualProxyT<T>& proxy, const TensorT<T>& a,
                      const TensorT<T>& b) {
  auto fa = proxy.features(a);
  auto fb = proxy.features(b);
  TensorT<T> acc = TensorT<T>::scalar(T(0));
  for (size_t i = 0; i < fa.size(); ++i) {
    auto term = mse(channel_l2_normalize(fa[i]), channel_l2_normalize(fb[i]));
    acc = add(acc, scale(term, static_cast<T>(proxy.stage_weights[i])));
  }
  return scale(acc, static_cast<T>(1.0 / fa.size()));
}

template <class T>
TensorT<T> tv_triplane(const TriPlaneT<T>& tp) {
  auto acc = tv_image(tp.planes[0], 2, 2);
  acc = add(acc, tv_image(tp.planes[1], 2, 2));
  return add(acc, tv_image(tp.planes[2], 2, 2));
}

// Eq-level aliases; gradient routing falls out of which tensors were used
// to build each argument (encoder output, rendering, decoder output).
template <class T>
TensorT<T> loss_latent(const TensorT<T>& encoded, const TensorT<T>& rendered) {
  return mse(encoded, rendered);
}

template <class T>
TensorT<T> loss_rgb(const TensorT<T>& ground_truth,
                    const TensorT<T>& decoded_render) {
  return mse(ground_truth, decoded_render);
}

template <class T>
TensorT<T> loss_ae_synth(const TensorT<T>& ground_truth,
                         const TensorT<T>& reconstruction) {
  return mse(ground_truth, reconstruction);
}

template <class T>
TensorT<T> loss_ae_real(const PerceptualProxyT<T>& proxy,
                        const TensorT<T>& image, const TensorT<T>& recon,
                        const TensorT<T>& latent, const LossWeights& w) {
  auto out = mse(image, recon);
  if (w.perceptual > 0.0)
    out = add(out, scale(perceptual(proxy, image, recon),
                         static_cast<T>(w.perceptual)));
  if (w.tv_latent > 0.0) {
    const Shape& s = latent.shape();  // [B,c,h,w] -> TV per item
    TensorT<T> tv = TensorT<T>::scalar(T(0));
    for (int b = 0; b < s[0]; ++b)
      tv = add(tv, tv_image(slice_batch_item(latent, b), 2, 1));
    out = add(out, scale(tv, static_cast<T>(w.tv_latent)));
  }
  return out;
}

// One (scene, pose) sample of the 3D-regularization batch.
template <class T>
struct Scene3DSample {
  TensorT<T> encoded;         // z_{s,p} = E_phi(x_{s,p}),       [c,h,w]
  TensorT<T> rendered;        // ~z_{s,p} from the latent scene, [c,h,w]
  TensorT<T> ground_truth;    // x_{s,p},                        [3,H,W]
  TensorT<T> decoded_render;  // ~x_{s,p} = D_psi(~z_{s,p}),     [3,H,W]
};

template <class T>
TensorT<T> objective_3d(const std::vector<Scene3DSample<T>>& batch,
                        const std::vector<const TriPlaneT<T>*>& triplanes,
                        const LossWeights& w) {
  TensorT<T> out = TensorT<T>::scalar(T(0));
  for (const auto& s : batch) {
    out = add(out, scale(loss_latent(s.encoded, s.rendered),
                         static_cast<T>(w.latent)));
    out = add(out, scale(loss_rgb(s.ground_truth, s.decoded_render),
                         static_cast<T>(w.rgb)));
  }
  for (const auto* tp : triplanes)
    out = add(out, scale(tv_triplane(*tp), static_cast<T>(w.tv3d)));
  return out;
}

template <class T>
struct AePreservationBatch {
  // synth: (x_{s,p}, D_psi(E_phi(x_{s,p}))) pairs
  std::vector<std::pair<TensorT<T>, TensorT<T>>> synth;
  // real: (I_j, reconstruction, latent k_j) triples
  struct RealItem {
    TensorT<T> image, recon, latent;
  };
  std::vector<RealItem> real;
};

template <class T>
TensorT<T> objective_ae(const AePreservationBatch<T>& batch,
                        const PerceptualProxyT<T>& proxy,
                        const LossWeights& w) {
  TensorT<T> out = TensorT<T>::scalar(T(0));
  for (const auto& [x, xhat] : batch.synth)
    out = add(out, scale(loss_ae_synth(x, xhat), static_cast<T>(w.ae_synth)));
  for (const auto& item : batch.real)
    out = add(out, scale(loss_ae_real(proxy, item.image, item.recon,
                                      item.latent, w),
                         static_cast<T>(w.ae_real)));
  return out;
}

// Joint objective: 3D regularization plus autoencoder preservation.
template <class T>
TensorT<T> objective_igae(const std::vector<Scene3DSample<T>>& batch3d,
                          const std::vector<const TriPlaneT<T>*>& triplanes,
                          const AePreservationBatch<T>& batch_ae,
                          const PerceptualProxyT<T>& proxy,
                          const LossWeights& w) {
  return add(objective_3d(batch3d, triplanes, w),
             objective_ae(batch_ae, proxy, w));
}

// Latent supervision: cached latents are plain buffers, so no gradient can
// reach the encoder by construction.
template <class T>
TensorT<T> objective_ls(
    const std::vector<std::pair<TensorT<T>, TensorT<T>>>& cached_vs_rendered) {
  TensorT<T> out = TensorT<T>::scalar(T(0));
  for (const auto& [cached, rendered] : cached_vs_rendered)
    out = add(out, mse(cached, rendered));
  return out;
}

// RGB alignment: decoded renderings against ground-truth views.
template <class T>
TensorT<T> objective_align(
    const std::vector<std::pair<TensorT<T>, TensorT<T>>>& gt_vs_decoded) {
  TensorT<T> out = TensorT<T>::scalar(T(0));
  for (const auto& [gt, dec] : gt_vs_decoded) out = add(out, mse(gt, dec));
  return out;
}

}  // namespace igae
