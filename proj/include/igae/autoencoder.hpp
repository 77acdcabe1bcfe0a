#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "igae/nn.hpp"
#include "igae/ops.hpp"

namespace igae {

// Architecture descriptor: downscale l (power of two), latent channels c,
// per-down-block channel schedule (one entry per stride-2 stage).
struct AutoencoderSpec {
  int downscale = 4;
  int channels = 8;
  std::vector<int> schedule = {32, 64};
  std::string activation = "silu";

  int stages() const {
    int l = downscale, n = 0;
    while (l > 1) {
      l >>= 1;
      ++n;
    }
    return n;
  }

  void validate() const {
    if (downscale < 2 || (downscale & (downscale - 1)) != 0)
      throw std::invalid_argument(
          "autoencoder: downscale must be a power of two >= 2, got " +
          std::to_string(downscale));
    if (channels < 1)
      throw std::invalid_argument("autoencoder: latent channels must be >= 1");
    if (static_cast<int>(schedule.size()) != stages())
      throw std::invalid_argument(
          "autoencoder: schedule needs log2(l)=" + std::to_string(stages()) +
          " entries, got " + std::to_string(schedule.size()));
    if (activation != "silu")
      throw std::invalid_argument("autoencoder: unsupported activation '" +
                                  activation + "'");
  }

  static std::vector<int> default_schedule(int downscale) {
    static const int base[3] = {32, 64, 128};
    std::vector<int> s;
    int l = downscale, i = 0;
    while (l > 1 && i < 3) {
      s.push_back(base[i]);
      l >>= 1;
      ++i;
    }
    while (l > 1) {
      s.push_back(128);
      l >>= 1;
    }
    return s;
  }
};

template <class T>
struct ConvLayerT {
  TensorT<T> w;  // [Cout,Cin,KH,KW]
  TensorT<T> b;  // [Cout]
  int stride = 1;
  int pad = 1;

  static ConvLayerT make(int cin, int cout, int k, int stride, int pad,
                         Rng& rng, bool trainable = true) {
    ConvLayerT l;
    l.w = kaiming_uniform<T>({cout, cin, k, k}, cin * k * k, rng, trainable);
    l.b = TensorT<T>::zeros({cout}, trainable);
    l.stride = stride;
    l.pad = pad;
    return l;
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    return bias_add_channels(conv2d(x, w, stride, pad), b);
  }

  ConvLayerT clone(bool trainable) const {
    return {w.detach(trainable), b.detach(trainable), stride, pad};
  }
};

// Deterministic encoder/decoder pair: per down block conv3x3-stride2 +
// SiLU, then a 1x1 projection to c; the decoder mirrors the stack with
// nearest-neighbor upsampling and finishes with a sigmoid head.
template <class T>
struct AutoencoderT {
  AutoencoderSpec spec;
  std::vector<ConvLayerT<T>> enc_blocks;
  ConvLayerT<T> enc_head;
  ConvLayerT<T> dec_head;
  std::vector<ConvLayerT<T>> dec_blocks;

  static AutoencoderT make(const AutoencoderSpec& spec, Rng& rng) {
    spec.validate();
    AutoencoderT ae;
    ae.spec = spec;
    const auto& sched = spec.schedule;
    int prev = 3;
    for (int s : sched) {
      ae.enc_blocks.push_back(ConvLayerT<T>::make(prev, s, 3, 2, 1, rng));
      prev = s;
    }
    ae.enc_head = ConvLayerT<T>::make(prev, spec.channels, 1, 1, 0, rng);
    ae.dec_head = ConvLayerT<T>::make(spec.channels, prev, 1, 1, 0, rng);
    for (size_t i = sched.size(); i-- > 0;) {
      const int cin = sched[i];
      const int cout = i == 0 ? 3 : sched[i - 1];
      ae.dec_blocks.push_back(ConvLayerT<T>::make(cin, cout, 3, 1, 1, rng));
    }
    return ae;
  }

  TensorT<T> encode(const TensorT<T>& x) const {
    const Shape& s = x.shape();
    if (s.size() != 4 || s[1] != 3)
      throw std::invalid_argument("encode: expected x[B,3,H,W], got " +
                                  shape_str(s));
    const int l = spec.downscale;
    if (s[2] % l != 0 || s[3] % l != 0)
      throw std::invalid_argument(
          "encode: extent " + std::to_string(s[2]) + "x" +
          std::to_string(s[3]) + " not divisible by downscale l=" +
          std::to_string(l));
    TensorT<T> h = x;
    for (const auto& blk : enc_blocks) h = silu(blk.forward(h));
    return enc_head.forward(h);
  }

  TensorT<T> decode(const TensorT<T>& z) const {
    const Shape& s = z.shape();
    if (s.size() != 4 || s[1] != spec.channels)
      throw std::invalid_argument("decode: expected z[B," +
                                  std::to_string(spec.channels) +
                                  ",h,w], got " + shape_str(s));
    TensorT<T> h = silu(dec_head.forward(z));
    for (size_t i = 0; i < dec_blocks.size(); ++i) {
      h = dec_blocks[i].forward(upsample_nearest2x(h));
      h = i + 1 < dec_blocks.size() ? silu(h) : sigmoid(h);
    }
    return h;
  }

  ParamList<T> encoder_params() const {
    ParamList<T> out;
    for (size_t i = 0; i < enc_blocks.size(); ++i) {
      out.push_back({"encoder.down" + std::to_string(i) + ".w",
                     enc_blocks[i].w});
      out.push_back({"encoder.down" + std::to_string(i) + ".b",
                     enc_blocks[i].b});
    }
    out.push_back({"encoder.head.w", enc_head.w});
    out.push_back({"encoder.head.b", enc_head.b});
    return out;
  }

  ParamList<T> decoder_params() const {
    ParamList<T> out;
    out.push_back({"decoder.head.w", dec_head.w});
    out.push_back({"decoder.head.b", dec_head.b});
    for (size_t i = 0; i < dec_blocks.size(); ++i) {
      out.push_back({"decoder.up" + std::to_string(i) + ".w",
                     dec_blocks[i].w});
      out.push_back({"decoder.up" + std::to_string(i) + ".b",
                     dec_blocks[i].b});
    }
    return out;
  }

  // Independent copy of decoder weights for per-scene fine-tuning.
  AutoencoderT clone_decoder_into(bool trainable) const {
    AutoencoderT copy = *this;
    copy.dec_head = dec_head.clone(trainable);
    copy.dec_blocks.clear();
    for (const auto& blk : dec_blocks)
      copy.dec_blocks.push_back(blk.clone(trainable));
    return copy;
  }
};

// FNV-1a over the encoder parameter bytes; identifies the phi a latent
// cache was built against.
template <class T>
uint64_t encoder_fingerprint(const AutoencoderT<T>& ae) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const TensorT<T>& t) {
    for (T v : t.data()) {
      const float f = static_cast<float>(v);
      const unsigned char* p = reinterpret_cast<const unsigned char*>(&f);
      for (size_t i = 0; i < sizeof(float); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& np : ae.encoder_params()) feed(np.tensor);
  return h;
}

}  // namespace igae
