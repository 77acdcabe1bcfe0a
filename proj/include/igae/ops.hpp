#pragma once

#include <cmath>

#include "igae/tensor.hpp"

namespace igae {

// ---------------------------------------------------------------------------
// conv2d: x[B,Cin,H,W] * k[Cout,Cin,KH,KW], stride in {1,2}, pad in {0,1}
// im2col + GEMM per batch item; fixed accumulation order per element.
// ---------------------------------------------------------------------------

namespace detail {

// col[(ci*KH+ky)*KW+kx, oy*OW+ox] = x[ci, oy*s+ky-p, ox*s+kx-p] or 0
template <class T>
void im2col(const T* x, int Cin, int H, int W, int KH, int KW, int stride,
            int pad, int OH, int OW, T* col) {
  for (int ci = 0; ci < Cin; ++ci)
    for (int ky = 0; ky < KH; ++ky)
      for (int kx = 0; kx < KW; ++kx) {
        T* row = col + ((static_cast<int64_t>(ci) * KH + ky) * KW + kx) * OH * OW;
        const T* plane = x + static_cast<int64_t>(ci) * H * W;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ky - pad;
          T* dst = row + static_cast<int64_t>(oy) * OW;
          if (iy < 0 || iy >= H) {
            std::fill_n(dst, OW, T(0));
            continue;
          }
          const T* src = plane + static_cast<int64_t>(iy) * W;
          // valid ox range: 0 <= ox*stride + kx - pad < W
          int lo = 0;
          while (lo < OW && lo * stride + kx - pad < 0) ++lo;
          int hi = OW;
          while (hi > lo && (hi - 1) * stride + kx - pad >= W) --hi;
          std::fill_n(dst, lo, T(0));
          if (stride == 1) {
            std::copy_n(src + lo + kx - pad, hi - lo, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox)
              dst[ox] = src[ox * stride + kx - pad];
          }
          std::fill_n(dst + hi, OW - hi, T(0));
        }
      }
}

// scatter-add the col layout back into an image gradient
template <class T>
void col2im_acc(const T* col, int Cin, int H, int W, int KH, int KW,
                int stride, int pad, int OH, int OW, T* dx) {
  for (int ci = 0; ci < Cin; ++ci)
    for (int ky = 0; ky < KH; ++ky)
      for (int kx = 0; kx < KW; ++kx) {
        const T* row =
            col + ((static_cast<int64_t>(ci) * KH + ky) * KW + kx) * OH * OW;
        T* plane = dx + static_cast<int64_t>(ci) * H * W;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          const T* src = row + static_cast<int64_t>(oy) * OW;
          T* dst = plane + static_cast<int64_t>(iy) * W;
          int lo = 0;
          while (lo < OW && lo * stride + kx - pad < 0) ++lo;
          int hi = OW;
          while (hi > lo && (hi - 1) * stride + kx - pad >= W) --hi;
          if (stride == 1) {
            T* d = dst + lo + kx - pad;
            for (int ox = lo; ox < hi; ++ox) d[ox - lo] += src[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox)
              dst[ox * stride + kx - pad] += src[ox];
          }
        }
      }
}

}  // namespace detail

template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& k, int stride,
                  int pad) {
  const Shape& xs = x.shape();
  const Shape& ks = k.shape();
  if (xs.size() != 4 || ks.size() != 4)
    throw std::invalid_argument("conv2d: expected x[B,Cin,H,W] k[Cout,Cin,KH,KW], got " +
                                shape_str(xs) + " and " + shape_str(ks));
  if (xs[1] != ks[1])
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(xs) +
                                " vs " + shape_str(ks));
  if (stride != 1 && stride != 2)
    throw std::invalid_argument("conv2d: stride must be 1 or 2");
  const int B = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
  const int Cout = ks[0], KH = ks[2], KW = ks[3];
  if (KH > H + 2 * pad || KW > W + 2 * pad)
    throw std::invalid_argument("conv2d: kernel " + shape_str(ks) +
                                " larger than padded input " + shape_str(xs) +
                                " (pad=" + std::to_string(pad) + ")");
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;
  const int ck = Cin * KH * KW;  // col rows
  const int64_t ohw = static_cast<int64_t>(OH) * OW;

  auto out = detail::make_result<T>({B, Cout, OH, OW}, {x.node(), k.node()});
  {
    std::vector<T> col(static_cast<size_t>(ck) * ohw);
    for (int b = 0; b < B; ++b) {
      const T* xb = x.data().data() + static_cast<int64_t>(b) * Cin * H * W;
      T* ob = out->value.data() + static_cast<int64_t>(b) * Cout * ohw;
      detail::im2col(xb, Cin, H, W, KH, KW, stride, pad, OH, OW, col.data());
      detail::gemm_acc(k.data().data(), col.data(), ob, Cout, ck,
                       static_cast<int>(ohw));
    }
  }

  if (out->requires_grad)
    out->backward_fn = [B, Cin, Cout, H, W, KH, KW, OH, OW, stride, pad, ck,
                        ohw](TensorNode<T>& self) {
      auto& px = *self.parents[0];
      auto& pk = *self.parents[1];
      const T* kv = pk.value.data();
      std::vector<T> col(static_cast<size_t>(ck) * ohw);
      std::vector<T> kt;  // [ck, Cout], transposed weights for dx
      if (px.requires_grad) {
        kt.resize(static_cast<size_t>(ck) * Cout);
        for (int co = 0; co < Cout; ++co)
          for (int r = 0; r < ck; ++r)
            kt[static_cast<int64_t>(r) * Cout + co] =
                kv[static_cast<int64_t>(co) * ck + r];
      }
      for (int b = 0; b < B; ++b) {
        const T* dyb = self.grad.data() + static_cast<int64_t>(b) * Cout * ohw;
        if (px.requires_grad) {
          std::fill(col.begin(), col.end(), T(0));
          detail::gemm_acc(kt.data(), dyb, col.data(), ck, Cout,
                           static_cast<int>(ohw));
          detail::col2im_acc(col.data(), Cin, H, W, KH, KW, stride, pad, OH,
                             OW,
                             px.grad.data() +
                                 static_cast<int64_t>(b) * Cin * H * W);
        }
        if (pk.requires_grad) {
          detail::im2col(px.value.data() + static_cast<int64_t>(b) * Cin * H * W,
                         Cin, H, W, KH, KW, stride, pad, OH, OW, col.data());
          detail::gemm_nt_acc(dyb, col.data(), pk.grad.data(), Cout,
                              static_cast<int>(ohw), ck);
        }
      }
    };
  return TensorT<T>(out);
}

// y[b,c,h,w] = x[b,c,h,w] + bias[c]
template <class T>
TensorT<T> bias_add_channels(const TensorT<T>& x, const TensorT<T>& bias) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || bias.shape().size() != 1 || bias.shape()[0] != xs[1])
    throw std::invalid_argument("bias_add_channels: got " + shape_str(xs) +
                                " and " + shape_str(bias.shape()));
  const int B = xs[0], C = xs[1];
  const int64_t plane = static_cast<int64_t>(xs[2]) * xs[3];
  auto out = detail::make_result<T>(xs, {x.node(), bias.node()});
  const auto& xv = x.data();
  const auto& bv = bias.data();
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const int64_t off = (static_cast<int64_t>(b) * C + c) * plane;
      const T bc = bv[c];
      for (int64_t i = 0; i < plane; ++i) out->value[off + i] = xv[off + i] + bc;
    }
  if (out->requires_grad)
    out->backward_fn = [B, C, plane](TensorNode<T>& self) {
      auto& px = *self.parents[0];
      auto& pb = *self.parents[1];
      if (px.requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          px.grad[i] += self.grad[i];
      if (pb.requires_grad)
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c) {
            const int64_t off = (static_cast<int64_t>(b) * C + c) * plane;
            T acc = T(0);
            for (int64_t i = 0; i < plane; ++i) acc += self.grad[off + i];
            pb.grad[c] += acc;
          }
    };
  return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// upsample_nearest2x: [B,C,H,W] -> [B,C,2H,2W]
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> upsample_nearest2x(const TensorT<T>& x) {
  const Shape& xs = x.shape();
  if (xs.size() != 4)
    throw std::invalid_argument("upsample_nearest2x: expected rank-4, got " +
                                shape_str(xs));
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  auto out = detail::make_result<T>({B, C, 2 * H, 2 * W}, {x.node()});
  const auto& xv = x.data();
  for (int bc = 0; bc < B * C; ++bc) {
    const T* ip = xv.data() + static_cast<int64_t>(bc) * H * W;
    T* op = out->value.data() + static_cast<int64_t>(bc) * 4 * H * W;
    for (int y = 0; y < H; ++y)
      for (int x2 = 0; x2 < W; ++x2) {
        const T v = ip[y * W + x2];
        T* o0 = op + (2 * y) * 2 * W + 2 * x2;
        T* o1 = o0 + 2 * W;
        o0[0] = v; o0[1] = v; o1[0] = v; o1[1] = v;
      }
  }
  if (out->requires_grad)
    out->backward_fn = [B, C, H, W](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (int bc = 0; bc < B * C; ++bc) {
        T* gp = p.grad.data() + static_cast<int64_t>(bc) * H * W;
        const T* dp = self.grad.data() + static_cast<int64_t>(bc) * 4 * H * W;
        for (int y = 0; y < H; ++y)
          for (int x2 = 0; x2 < W; ++x2) {
            const T* d0 = dp + (2 * y) * 2 * W + 2 * x2;
            const T* d1 = d0 + 2 * W;
            gp[y * W + x2] += d0[0] + d0[1] + d1[0] + d1[1];
          }
      }
    };
  return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// grid_sample_bilinear: plane[F,K,K] sampled at uv[n,2] in [-1,1]^2
// uv[:,0] -> column axis, uv[:,1] -> row axis, align-corners mapping;
// out-of-range coordinates clamp to the boundary.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> grid_sample_bilinear(const TensorT<T>& plane, const TensorT<T>& uv) {
  const Shape& ps = plane.shape();
  const Shape& us = uv.shape();
  if (ps.size() != 3 || ps[1] != ps[2])
    throw std::invalid_argument("grid_sample_bilinear: expected plane[F,K,K], got " +
                                shape_str(ps));
  if (us.size() != 2 || us[1] != 2)
    throw std::invalid_argument("grid_sample_bilinear: expected uv[n,2], got " +
                                shape_str(us));
  const int F = ps[0], K = ps[1], n = us[0];
  for (T v : uv.data())
    if (!std::isfinite(v))
      throw std::invalid_argument("grid_sample_bilinear: non-finite uv");

  auto out = detail::make_result<T>({n, F}, {plane.node(), uv.node()});
  const T* pv = plane.data().data();
  const T* uvv = uv.data().data();
  const T half = static_cast<T>(K - 1) / T(2);

  // per point: x0,y0, wx,wy and whether each axis was clamped
  std::vector<int> ix0(n), iy0(n);
  std::vector<T> wx(n), wy(n);
  std::vector<uint8_t> free_x(n), free_y(n);
  for (int i = 0; i < n; ++i) {
    T fx = (uvv[2 * i] + T(1)) * half;
    T fy = (uvv[2 * i + 1] + T(1)) * half;
    free_x[i] = fx > T(0) && fx < static_cast<T>(K - 1);
    free_y[i] = fy > T(0) && fy < static_cast<T>(K - 1);
    fx = std::clamp(fx, T(0), static_cast<T>(K - 1));
    fy = std::clamp(fy, T(0), static_cast<T>(K - 1));
    int x0 = std::min(static_cast<int>(fx), K - 2 >= 0 ? K - 2 : 0);
    int y0 = std::min(static_cast<int>(fy), K - 2 >= 0 ? K - 2 : 0);
    ix0[i] = x0;
    iy0[i] = y0;
    wx[i] = fx - static_cast<T>(x0);
    wy[i] = fy - static_cast<T>(y0);
  }
  for (int i = 0; i < n; ++i) {
    const int x0 = ix0[i], y0 = iy0[i];
    const int x1 = std::min(x0 + 1, K - 1), y1 = std::min(y0 + 1, K - 1);
    const T ax = wx[i], ay = wy[i];
    for (int f = 0; f < F; ++f) {
      const T* fp = pv + static_cast<int64_t>(f) * K * K;
      const T v00 = fp[y0 * K + x0], v01 = fp[y0 * K + x1];
      const T v10 = fp[y1 * K + x0], v11 = fp[y1 * K + x1];
      out->value[static_cast<int64_t>(i) * F + f] =
          (T(1) - ay) * ((T(1) - ax) * v00 + ax * v01) +
          ay * ((T(1) - ax) * v10 + ax * v11);
    }
  }

  if (out->requires_grad)
    out->backward_fn = [F, K, n, half, ix0, iy0, wx, wy, free_x,
                        free_y](TensorNode<T>& self) {
      auto& pp = *self.parents[0];
      auto& pu = *self.parents[1];
      const T* pv = pp.value.data();
      for (int i = 0; i < n; ++i) {
        const int x0 = ix0[i], y0 = iy0[i];
        const int x1 = std::min(x0 + 1, K - 1), y1 = std::min(y0 + 1, K - 1);
        const T ax = wx[i], ay = wy[i];
        T dfx = T(0), dfy = T(0);
        for (int f = 0; f < F; ++f) {
          const T g = self.grad[static_cast<int64_t>(i) * F + f];
          if (pp.requires_grad) {
            T* gp = pp.grad.data() + static_cast<int64_t>(f) * K * K;
            gp[y0 * K + x0] += g * (T(1) - ay) * (T(1) - ax);
            gp[y0 * K + x1] += g * (T(1) - ay) * ax;
            gp[y1 * K + x0] += g * ay * (T(1) - ax);
            gp[y1 * K + x1] += g * ay * ax;
          }
          if (pu.requires_grad) {
            const T* fp = pv + static_cast<int64_t>(f) * K * K;
            const T v00 = fp[y0 * K + x0], v01 = fp[y0 * K + x1];
            const T v10 = fp[y1 * K + x0], v11 = fp[y1 * K + x1];
            dfx += g * ((T(1) - ay) * (v01 - v00) + ay * (v11 - v10));
            dfy += g * ((T(1) - ax) * (v10 - v00) + ax * (v11 - v01));
          }
        }
        if (pu.requires_grad) {
          if (free_x[i]) pu.grad[2 * i] += dfx * half;
          if (free_y[i]) pu.grad[2 * i + 1] += dfy * half;
        }
      }
    };
  return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// composite_rays: volume-rendering quadrature over S samples per ray.
//   sigma[n,S] >= 0, channels[n,S,C], deltas[n,S] > 0, bg[C] -> out[n,C]
//   alpha_i = 1 - exp(-sigma_i * delta_i); T_i = prod_{j<i}(1 - alpha_j)
//   out = sum_i T_i alpha_i c_i + T_{S+1} bg
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> composite_rays(const TensorT<T>& sigma, const TensorT<T>& channels,
                          const TensorT<T>& deltas, const TensorT<T>& bg) {
  const Shape& ss = sigma.shape();
  const Shape& cs = channels.shape();
  const Shape& ds = deltas.shape();
  const Shape& bs = bg.shape();
  if (ss.size() != 2 || cs.size() != 3 || ds.size() != 2 || bs.size() != 1 ||
      cs[0] != ss[0] || cs[1] != ss[1] || ds != ss || cs[2] != bs[0])
    throw std::invalid_argument(
        "composite_rays: incompatible shapes sigma" + shape_str(ss) +
        " channels" + shape_str(cs) + " deltas" + shape_str(ds) + " bg" +
        shape_str(bs));
  const int n = ss[0], S = ss[1], C = bs[0];
  for (T v : sigma.data())
    if (v < T(0))
      throw std::invalid_argument(
          "composite_rays: negative sigma violates the field contract");
  for (T v : deltas.data())
    if (!(v > T(0)))
      throw std::invalid_argument("composite_rays: deltas must be positive");

  auto out = detail::make_result<T>(
      {n, C}, {sigma.node(), channels.node(), deltas.node(), bg.node()});
  std::vector<T> alphas(static_cast<size_t>(n) * S);
  std::vector<T> trans(static_cast<size_t>(n) * S);  // T before each sample
  std::vector<T> tfinal(n);
  const T* sv = sigma.data().data();
  const T* cv = channels.data().data();
  const T* dv = deltas.data().data();
  const T* bv = bg.data().data();
  for (int i = 0; i < n; ++i) {
    T tr = T(1);
    T* orow = out->value.data() + static_cast<int64_t>(i) * C;
    for (int s = 0; s < S; ++s) {
      const int64_t k = static_cast<int64_t>(i) * S + s;
      const T a = -std::expm1(-sv[k] * dv[k]);
      alphas[k] = a;
      trans[k] = tr;
      const T w = tr * a;
      const T* crow = cv + k * C;
      for (int c = 0; c < C; ++c) orow[c] += w * crow[c];
      tr *= (T(1) - a);
    }
    tfinal[i] = tr;
    for (int c = 0; c < C; ++c) orow[c] += tr * bv[c];
  }

  if (out->requires_grad)
    out->backward_fn = [n, S, C, alphas = std::move(alphas),
                        trans = std::move(trans),
                        tfinal = std::move(tfinal)](TensorNode<T>& self) {
      auto& psig = *self.parents[0];
      auto& pch = *self.parents[1];
      auto& pdel = *self.parents[2];
      auto& pbg = *self.parents[3];
      const T* cv = pch.value.data();
      const T* sv = psig.value.data();
      const T* dv = pdel.value.data();
      const T* bv = pbg.value.data();
      for (int i = 0; i < n; ++i) {
        const T* dout = self.grad.data() + static_cast<int64_t>(i) * C;
        T bg_dot = T(0);
        for (int c = 0; c < C; ++c) bg_dot += dout[c] * bv[c];
        if (pbg.requires_grad)
          for (int c = 0; c < C; ++c) pbg.grad[c] += tfinal[i] * dout[c];
        // suffix = sum_{j>s} T_j alpha_j <dout,ch_j> + T_final <dout,bg>
        T suffix = tfinal[i] * bg_dot;
        for (int s = S - 1; s >= 0; --s) {
          const int64_t k = static_cast<int64_t>(i) * S + s;
          const T a = alphas[k];
          const T tr = trans[k];
          T ch_dot = T(0);
          const T* crow = cv + k * C;
          for (int c = 0; c < C; ++c) ch_dot += dout[c] * crow[c];
          if (pch.requires_grad) {
            const T w = tr * a;
            T* gch = pch.grad.data() + k * C;
            for (int c = 0; c < C; ++c) gch[c] += w * dout[c];
          }
          const T one_m_a = T(1) - a;
          T dalpha = tr * ch_dot;
          if (one_m_a > T(1e-12)) dalpha -= suffix / one_m_a;
          const T dexp = std::exp(-sv[k] * dv[k]);  // d alpha / d (sigma*delta)
          if (psig.requires_grad) psig.grad[k] += dalpha * dexp * dv[k];
          if (pdel.requires_grad) pdel.grad[k] += dalpha * dexp * sv[k];
          suffix += tr * a * ch_dot;
        }
      }
    };
  return TensorT<T>(out);
}

// Forward-only per-ray accumulated opacity 1 - T_{S+1}; mirrors composite_rays.
template <class T>
std::vector<T> accumulated_opacity(const std::vector<T>& sigma,
                                   const std::vector<T>& deltas, int n, int S) {
  std::vector<T> out(n);
  for (int i = 0; i < n; ++i) {
    T tr = T(1);
    for (int s = 0; s < S; ++s) {
      const int64_t k = static_cast<int64_t>(i) * S + s;
      tr *= std::exp(-sigma[k] * deltas[k]);
    }
    out[i] = T(1) - tr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total variation. img[C,H,W]; pixel "vectors" run across C.
//   L = 1/(HW) sum_ij [ ||I_ij - I_(i-1)j||_p^q + ||I_ij - I_i(j-1)||_p^q ]
// supported (p,q): (2,2) and (2,1); interior offsets only.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> tv_image(const TensorT<T>& img, int p, int q) {
  const Shape& s = img.shape();
  if (s.size() != 3)
    throw std::invalid_argument("tv_image: expected img[C,H,W], got " +
                                shape_str(s));
  if (!(p == 2 && (q == 2 || q == 1)))
    throw std::invalid_argument("tv_image: unsupported (p,q)=(" +
                                std::to_string(p) + "," + std::to_string(q) +
                                "); supported: (2,2), (2,1)");
  const int C = s[0], H = s[1], W = s[2];
  if (H < 2 || W < 2)
    throw std::invalid_argument("tv_image: requires H,W >= 2, got " +
                                shape_str(s));
  auto out = detail::make_result<T>({}, {img.node()});
  const T* iv = img.data().data();
  const int64_t plane = static_cast<int64_t>(H) * W;
  auto at = [&](int c, int y, int x) { return iv[c * plane + y * W + x]; };
  const T norm = T(1) / static_cast<T>(plane);

  double acc = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (y > 0) {
        double ss = 0.0;
        for (int c = 0; c < C; ++c) {
          const double d = static_cast<double>(at(c, y, x)) - at(c, y - 1, x);
          ss += d * d;
        }
        acc += (q == 2) ? ss : std::sqrt(ss);
      }
      if (x > 0) {
        double ss = 0.0;
        for (int c = 0; c < C; ++c) {
          const double d = static_cast<double>(at(c, y, x)) - at(c, y, x - 1);
          ss += d * d;
        }
        acc += (q == 2) ? ss : std::sqrt(ss);
      }
    }
  out->value[0] = static_cast<T>(acc) * norm;

  if (out->requires_grad)
    out->backward_fn = [C, H, W, q, plane, norm](TensorNode<T>& self) {
      auto& pi = *self.parents[0];
      const T g = self.grad[0] * norm;
      const T* iv = pi.value.data();
      T* gv = pi.grad.data();
      auto diff_grad = [&](int c, int y, int x, int y2, int x2) {
        const T d = iv[c * plane + y * W + x] - iv[c * plane + y2 * W + x2];
        return d;
      };
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          if (y > 0) {
            if (q == 2) {
              for (int c = 0; c < C; ++c) {
                const T d = diff_grad(c, y, x, y - 1, x);
                gv[c * plane + y * W + x] += g * T(2) * d;
                gv[c * plane + (y - 1) * W + x] -= g * T(2) * d;
              }
            } else {
              T ss = T(0);
              for (int c = 0; c < C; ++c) {
                const T d = diff_grad(c, y, x, y - 1, x);
                ss += d * d;
              }
              const T m = std::sqrt(ss);
              if (m > T(0)) {
                for (int c = 0; c < C; ++c) {
                  const T d = diff_grad(c, y, x, y - 1, x);
                  gv[c * plane + y * W + x] += g * d / m;
                  gv[c * plane + (y - 1) * W + x] -= g * d / m;
                }
              }
            }
          }
          if (x > 0) {
            if (q == 2) {
              for (int c = 0; c < C; ++c) {
                const T d = diff_grad(c, y, x, y, x - 1);
                gv[c * plane + y * W + x] += g * T(2) * d;
                gv[c * plane + y * W + x - 1] -= g * T(2) * d;
              }
            } else {
              T ss = T(0);
              for (int c = 0; c < C; ++c) {
                const T d = diff_grad(c, y, x, y, x - 1);
                ss += d * d;
              }
              const T m = std::sqrt(ss);
              if (m > T(0)) {
                for (int c = 0; c < C; ++c) {
                  const T d = diff_grad(c, y, x, y, x - 1);
                  gv[c * plane + y * W + x] += g * d / m;
                  gv[c * plane + y * W + x - 1] -= g * d / m;
                }
              }
            }
          }
        }
    };
  return TensorT<T>(out);
}

// ---------------------------------------------------------------------------
// batch stacking/slicing along the leading axis
// ---------------------------------------------------------------------------

// Stack equal-shape tensors into one with a new leading batch axis.
template <class T>
TensorT<T> stack_batch(const std::vector<TensorT<T>>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: no inputs");
  const Shape& inner = items[0].shape();
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  for (const auto& t : items) {
    if (t.shape() != inner)
      throw std::invalid_argument("stack_batch: shape mismatch " +
                                  shape_str(inner) + " vs " +
                                  shape_str(t.shape()));
    parents.push_back(t.node());
  }
  Shape out_shape;
  out_shape.push_back(static_cast<int>(items.size()));
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());
  auto n = detail::make_result<T>(out_shape, std::move(parents));
  const int64_t sz = shape_numel(inner);
  for (size_t i = 0; i < items.size(); ++i)
    std::copy(items[i].data().begin(), items[i].data().end(),
              n->value.begin() + static_cast<int64_t>(i) * sz);
  if (n->requires_grad)
    n->backward_fn = [sz](TensorNode<T>& self) {
      for (size_t i = 0; i < self.parents.size(); ++i) {
        auto& p = *self.parents[i];
        if (!p.requires_grad) continue;
        const T* g = self.grad.data() + static_cast<int64_t>(i) * sz;
        for (int64_t j = 0; j < sz; ++j) p.grad[j] += g[j];
      }
    };
  return TensorT<T>(n);
}

// One item of a batched tensor, leading axis dropped.
template <class T>
TensorT<T> slice_batch_item(const TensorT<T>& x, int b) {
  const Shape& s = x.shape();
  if (s.size() < 2 || b < 0 || b >= s[0])
    throw std::invalid_argument("slice_batch_item: bad index " +
                                std::to_string(b) + " for " + shape_str(s));
  Shape inner(s.begin() + 1, s.end());
  const int64_t sz = shape_numel(inner);
  auto n = detail::make_result<T>(inner, {x.node()});
  std::copy_n(x.data().begin() + static_cast<int64_t>(b) * sz, sz,
              n->value.begin());
  if (n->requires_grad)
    n->backward_fn = [b, sz](TensorNode<T>& self) {
      auto& p = *self.parents[0];
      for (int64_t j = 0; j < sz; ++j)
        p.grad[static_cast<int64_t>(b) * sz + j] += self.grad[j];
    };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// channel_l2_normalize: x[B,C,H,W] -> x / sqrt(sum_c x^2 + eps), per location
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> channel_l2_normalize(const TensorT<T>& x, T eps = T(1e-8)) {
  const Shape& s = x.shape();
  if (s.size() != 4)
    throw std::invalid_argument("channel_l2_normalize: expected rank-4, got " +
                                shape_str(s));
  const int B = s[0], C = s[1];
  const int64_t plane = static_cast<int64_t>(s[2]) * s[3];
  auto out = detail::make_result<T>(s, {x.node()});
  const T* xv = x.data().data();
  std::vector<T> inv_norm(static_cast<size_t>(B) * plane);
  for (int b = 0; b < B; ++b)
    for (int64_t i = 0; i < plane; ++i) {
      T ss = eps;
      for (int c = 0; c < C; ++c) {
        const T v = xv[(static_cast<int64_t>(b) * C + c) * plane + i];
        ss += v * v;
      }
      const T inv = T(1) / std::sqrt(ss);
      inv_norm[b * plane + i] = inv;
      for (int c = 0; c < C; ++c) {
        const int64_t k = (static_cast<int64_t>(b) * C + c) * plane + i;
        out->value[k] = xv[k] * inv;
      }
    }
  if (out->requires_grad)
    out->backward_fn = [B, C, plane, inv_norm = std::move(inv_norm)](
                           TensorNode<T>& self) {
      auto& px = *self.parents[0];
      const T* xv = px.value.data();
      for (int b = 0; b < B; ++b)
        for (int64_t i = 0; i < plane; ++i) {
          const T inv = inv_norm[b * plane + i];
          T dot = T(0);
          for (int c = 0; c < C; ++c) {
            const int64_t k = (static_cast<int64_t>(b) * C + c) * plane + i;
            dot += self.grad[k] * xv[k];
          }
          for (int c = 0; c < C; ++c) {
            const int64_t k = (static_cast<int64_t>(b) * C + c) * plane + i;
            px.grad[k] += inv * self.grad[k] - xv[k] * dot * inv * inv * inv;
          }
        }
    };
  return TensorT<T>(out);
}

}  // namespace igae
