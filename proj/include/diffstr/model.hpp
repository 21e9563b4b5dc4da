#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffstr/common.hpp"
#include "diffstr/image.hpp"
#include "diffstr/rng.hpp"
#include "diffstr/tape.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

/// Dimensions of the full pipeline: patch vision encoder, non-autoregressive
/// decoder with time conditioning, and the two output heads.
struct ModelConfig {
  int img_h = 32, img_w = 64, img_c = 1;
  int patch_h = 4, patch_w = 8;
  int enc_dim = 128, enc_layers = 4, enc_heads = 4;
  int dec_dim = 128, dec_layers = 2, dec_heads = 4;
  int mlp_ratio = 4;
  int seq_len = 9;     // L = max label length + 1
  int vocab_size = 39; // K, charset + EOS/PAD/MASK
  int max_step = 20;   // T
  std::string activation = "gelu";
  double dropout = 0.0;

  int patches_y() const { return img_h / patch_h; }
  int patches_x() const { return img_w / patch_w; }
  int n_patches() const { return patches_y() * patches_x(); }
  int patch_dim() const { return patch_h * patch_w * img_c; }

  void validate() const {
    if (img_h % patch_h != 0 || img_w % patch_w != 0)
      throw ConfigError("patch size must divide image size");
    if (enc_dim % enc_heads != 0 || dec_dim % dec_heads != 0)
      throw ConfigError("heads must divide the hidden dim");
    if (enc_dim % 2 != 0 || dec_dim % 2 != 0)
      throw ConfigError("hidden dims must be even (sinusoidal embeddings)");
    if (seq_len < 1 || vocab_size < 4 || max_step < 1)
      throw ConfigError("seq_len/vocab_size/max_step out of range");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout out of range");
  }
};

/// Interleaved sin/cos embedding of the scalar step index: slot 2i holds
/// sin(t * w_i), slot 2i+1 holds cos(t * w_i), w_i = 10000^(-2i/d).
template <class S>
RowVec<S> time_sinusoid(int t, int d) {
  RowVec<S> out(d);
  for (int i = 0; i < d / 2; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * (2.0 * i / static_cast<double>(d)));
    out(2 * i) = static_cast<S>(std::sin(t * freq));
    out(2 * i + 1) = static_cast<S>(std::cos(t * freq));
  }
  return out;
}

/// Per-position outputs of one denoiser call (inference path).
template <class S>
struct DenoiserOut {
  Mat<S> char_logits;       // L x K
  Vec<S> presence_logits;   // L
};

template <class S>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    act_ = activation_from_string(cfg_.activation);
    register_params();
  }

  Model(ModelConfig cfg, Rng& rng) : Model(std::move(cfg)) { init_weights(rng); }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }

  /// Truncated normal (sigma 0.02, cut at 2 sigma) for weights and
  /// embeddings, zeros for biases, ones for layer-norm gains.
  void init_weights(Rng& rng) {
    for (int i = 0; i < store_.size(); ++i) {
      auto& e = store_.entry(i);
      switch (e.kind) {
        case ParamKind::Bias:
          e.value.setZero();
          break;
        case ParamKind::Gain:
          e.value.setOnes();
          break;
        case ParamKind::Weight:
        case ParamKind::Embedding:
          for (Eigen::Index r = 0; r < e.value.rows(); ++r)
            for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
              double x;
              do {
                x = rng.normal() * 0.02;
              } while (std::abs(x) > 0.04);
              e.value(r, c) = static_cast<S>(x);
            }
          break;
      }
    }
  }

  /// Flattens a batch of images to (B*P) x patch_dim, patches in row-major
  /// patch order, each patch flattened row-major with channels innermost.
  Mat<S> patchify(const std::vector<Image>& batch) const {
    const int P = cfg_.n_patches();
    const int pd = cfg_.patch_dim();
    Mat<S> out(static_cast<Eigen::Index>(batch.size()) * P, pd);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Image& img = batch[b];
      if (img.h != cfg_.img_h || img.w != cfg_.img_w || img.c != cfg_.img_c)
        throw ShapeMismatch("image is " + std::to_string(img.h) + "x" +
                            std::to_string(img.w) + "x" + std::to_string(img.c) +
                            ", model expects " + std::to_string(cfg_.img_h) +
                            "x" + std::to_string(cfg_.img_w) + "x" +
                            std::to_string(cfg_.img_c));
      for (int py = 0; py < cfg_.patches_y(); ++py)
        for (int px = 0; px < cfg_.patches_x(); ++px) {
          const Eigen::Index row =
              static_cast<Eigen::Index>(b) * P + py * cfg_.patches_x() + px;
          for (int dy = 0; dy < cfg_.patch_h; ++dy)
            for (int dx = 0; dx < cfg_.patch_w; ++dx)
              for (int ch = 0; ch < cfg_.img_c; ++ch)
                out(row, (dy * cfg_.patch_w + dx) * cfg_.img_c + ch) =
                    static_cast<S>(img.planes[static_cast<std::size_t>(ch)](
                        py * cfg_.patch_h + dy, px * cfg_.patch_w + dx));
        }
    }
    return out;
  }

  /// Vision encoder: patch embedding + learned positions + pre-norm
  /// self-attention blocks. Returns (B*P) x enc_dim.
  Var<S> encode(Tape<S>& tape, const std::vector<Image>& batch,
                Rng* dropout_rng = nullptr, bool zero_pos = false) {
    const int B = static_cast<int>(batch.size());
    const int P = cfg_.n_patches();
    Var<S> x = linear(tape.input(patchify(batch)), p(tape, w_.enc_patch_W),
                      p(tape, w_.enc_patch_b));
    if (!zero_pos) {
      std::vector<int> pos_ids(static_cast<std::size_t>(B) * P);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < P; ++i) pos_ids[static_cast<std::size_t>(b) * P + i] = i;
      x = x + embedding(p(tape, w_.enc_pos), pos_ids);
    }
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const auto& ly = w_.enc[static_cast<std::size_t>(l)];
      Var<S> h = layer_norm(x, p(tape, ly.ln1_g), p(tape, ly.ln1_b));
      Var<S> a = multihead_attention(
          linear(h, p(tape, ly.Wq), p(tape, ly.bq)),
          linear(h, p(tape, ly.Wk), p(tape, ly.bk)),
          linear(h, p(tape, ly.Wv), p(tape, ly.bv)), B, cfg_.enc_heads, P, P);
      x = x + maybe_dropout(linear(a, p(tape, ly.Wo), p(tape, ly.bo)), dropout_rng);
      Var<S> m = layer_norm(x, p(tape, ly.ln2_g), p(tape, ly.ln2_b));
      m = linear(activation(linear(m, p(tape, ly.W1), p(tape, ly.b1)), act_),
                 p(tape, ly.W2), p(tape, ly.b2));
      x = x + maybe_dropout(m, dropout_rng);
    }
    return layer_norm(x, p(tape, w_.enc_lnf_g), p(tape, w_.enc_lnf_b));
  }

  struct Output {
    Var<S> char_logits;  // (B*L) x K
    Var<S> presence;     // (B*L) x 1
  };

  /// Denoiser decoder. xts are the noisy sequences, ts the per-sample
  /// diffusion steps; z is the (B*P) x enc_dim conditioning from encode().
  Output decode(Tape<S>& tape, Var<S> z, const std::vector<TokenSeq>& xts,
                const std::vector<int>& ts, Rng* dropout_rng = nullptr) {
    const int B = static_cast<int>(xts.size());
    const int L = cfg_.seq_len;
    const int P = cfg_.n_patches();
    if (ts.size() != xts.size())
      throw ShapeMismatch("decode: xts/ts size mismatch");
    if (z.rows() != static_cast<Eigen::Index>(B) * P)
      throw ShapeMismatch("decode: z rows " + std::to_string(z.rows()) +
                          ", expected " + std::to_string(B * P));

    std::vector<int> flat_ids(static_cast<std::size_t>(B) * L);
    std::vector<int> pos_ids(static_cast<std::size_t>(B) * L);
    Mat<S> sinus(B, cfg_.dec_dim);
    for (int b = 0; b < B; ++b) {
      const TokenSeq& xt = xts[static_cast<std::size_t>(b)];
      if (static_cast<int>(xt.size()) != L)
        throw ShapeMismatch("decode: sequence length " +
                            std::to_string(xt.size()) + ", expected " +
                            std::to_string(L));
      const int t = ts[static_cast<std::size_t>(b)];
      if (t < 0 || t > cfg_.max_step)
        throw StepOutOfRange("decode: t=" + std::to_string(t) +
                             " outside [0, " + std::to_string(cfg_.max_step) + "]");
      for (int i = 0; i < L; ++i) {
        const int id = xt[static_cast<std::size_t>(i)];
        if (id < 0 || id >= cfg_.vocab_size)
          throw ShapeMismatch("decode: token id " + std::to_string(id) +
                              " outside [0, " + std::to_string(cfg_.vocab_size) + ")");
        flat_ids[static_cast<std::size_t>(b) * L + i] = id;
        pos_ids[static_cast<std::size_t>(b) * L + i] = i;
      }
      sinus.row(b) = time_sinusoid<S>(t, cfg_.dec_dim);
    }

    // time positional encoding: sinusoid -> linear -> act -> linear
    Var<S> tvec = linear(
        activation(linear(tape.input(std::move(sinus)), p(tape, w_.time_W1),
                          p(tape, w_.time_b1)),
                   act_),
        p(tape, w_.time_W2), p(tape, w_.time_b2));

    Var<S> zp = z;
    if (cfg_.enc_dim != cfg_.dec_dim)
      zp = linear(z, p(tape, w_.zproj_W), p(tape, w_.zproj_b));

    Var<S> x = embedding(p(tape, w_.dec_tok), flat_ids) +
               embedding(p(tape, w_.dec_pos), pos_ids);
    x = add_per_sample_row(x, tvec, L);
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const auto& ly = w_.dec[static_cast<std::size_t>(l)];
      x = add_per_sample_row(x, tvec, L);
      Var<S> h = layer_norm(x, p(tape, ly.ln1_g), p(tape, ly.ln1_b));
      Var<S> a = multihead_attention(
          linear(h, p(tape, ly.Wq), p(tape, ly.bq)),
          linear(h, p(tape, ly.Wk), p(tape, ly.bk)),
          linear(h, p(tape, ly.Wv), p(tape, ly.bv)), B, cfg_.dec_heads, L, L);
      x = x + maybe_dropout(linear(a, p(tape, ly.Wo), p(tape, ly.bo)), dropout_rng);
      Var<S> hx = layer_norm(x, p(tape, ly.lnx_g), p(tape, ly.lnx_b));
      Var<S> ax = multihead_attention(
          linear(hx, p(tape, ly.xWq), p(tape, ly.xbq)),
          linear(zp, p(tape, ly.xWk), p(tape, ly.xbk)),
          linear(zp, p(tape, ly.xWv), p(tape, ly.xbv)), B, cfg_.dec_heads, L, P);
      x = x + maybe_dropout(linear(ax, p(tape, ly.xWo), p(tape, ly.xbo)),
                            dropout_rng);
      Var<S> m = layer_norm(x, p(tape, ly.ln2_g), p(tape, ly.ln2_b));
      m = linear(activation(linear(m, p(tape, ly.W1), p(tape, ly.b1)), act_),
                 p(tape, ly.W2), p(tape, ly.b2));
      x = x + maybe_dropout(m, dropout_rng);
    }
    Var<S> h = layer_norm(x, p(tape, w_.dec_lnf_g), p(tape, w_.dec_lnf_b));
    return Output{linear(h, p(tape, w_.head_char_W), p(tape, w_.head_char_b)),
                  linear(h, p(tape, w_.head_pres_W), p(tape, w_.head_pres_b))};
  }

  /// Inference: conditioning features for one image (P x enc_dim).
  Mat<S> encode_one(const Image& img) {
    Tape<S> tape;
    return encode(tape, {img}).val();
  }

  /// Inference: one denoiser evaluation against precomputed features.
  DenoiserOut<S> denoise_one(const Mat<S>& z, const TokenSeq& xt, int t) {
    Tape<S> tape;
    Output out = decode(tape, tape.input(z), {xt}, {t});
    return DenoiserOut<S>{out.char_logits.val(), out.presence.val().col(0)};
  }

 private:
  struct EncLayer {
    int ln1_g, ln1_b, Wq, bq, Wk, bk, Wv, bv, Wo, bo;
    int ln2_g, ln2_b, W1, b1, W2, b2;
  };
  struct DecLayer {
    int ln1_g, ln1_b, Wq, bq, Wk, bk, Wv, bv, Wo, bo;
    int lnx_g, lnx_b, xWq, xbq, xWk, xbk, xWv, xbv, xWo, xbo;
    int ln2_g, ln2_b, W1, b1, W2, b2;
  };
  struct Weights {
    int enc_patch_W, enc_patch_b, enc_pos;
    std::vector<EncLayer> enc;
    int enc_lnf_g, enc_lnf_b;
    int dec_tok, dec_pos;
    int time_W1, time_b1, time_W2, time_b2;
    int zproj_W = -1, zproj_b = -1;
    std::vector<DecLayer> dec;
    int dec_lnf_g, dec_lnf_b;
    int head_char_W, head_char_b, head_pres_W, head_pres_b;
  };

  Var<S> p(Tape<S>& tape, int pid) { return tape.param(store_, pid); }

  Var<S> maybe_dropout(Var<S> v, Rng* rng) {
    if (rng == nullptr || cfg_.dropout <= 0.0) return v;
    return dropout(v, cfg_.dropout, *rng);
  }

  // weight decay applies to projection matrices only, not biases, norm
  // parameters or embeddings
  int add_w(const std::string& name, int r, int c) {
    return store_.add(name, r, c, true, ParamKind::Weight);
  }
  int add_b(const std::string& name, int c) {
    return store_.add(name, 1, c, false, ParamKind::Bias);
  }
  int add_emb(const std::string& name, int r, int c) {
    return store_.add(name, r, c, false, ParamKind::Embedding);
  }
  int add_gain(const std::string& name, int c) {
    return store_.add(name, 1, c, false, ParamKind::Gain);
  }

  void register_params() {
    const int de = cfg_.enc_dim, dd = cfg_.dec_dim;
    w_.enc_patch_W = add_w("enc.patch.W", cfg_.patch_dim(), de);
    w_.enc_patch_b = add_b("enc.patch.b", de);
    w_.enc_pos = add_emb("enc.pos", cfg_.n_patches(), de);
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const std::string pre = "enc.L" + std::to_string(l) + ".";
      EncLayer ly;
      ly.ln1_g = add_gain(pre + "ln1.g", de);
      ly.ln1_b = add_b(pre + "ln1.b", de);
      ly.Wq = add_w(pre + "attn.Wq", de, de); ly.bq = add_b(pre + "attn.bq", de);
      ly.Wk = add_w(pre + "attn.Wk", de, de); ly.bk = add_b(pre + "attn.bk", de);
      ly.Wv = add_w(pre + "attn.Wv", de, de); ly.bv = add_b(pre + "attn.bv", de);
      ly.Wo = add_w(pre + "attn.Wo", de, de); ly.bo = add_b(pre + "attn.bo", de);
      ly.ln2_g = add_gain(pre + "ln2.g", de);
      ly.ln2_b = add_b(pre + "ln2.b", de);
      ly.W1 = add_w(pre + "mlp.W1", de, de * cfg_.mlp_ratio);
      ly.b1 = add_b(pre + "mlp.b1", de * cfg_.mlp_ratio);
      ly.W2 = add_w(pre + "mlp.W2", de * cfg_.mlp_ratio, de);
      ly.b2 = add_b(pre + "mlp.b2", de);
      w_.enc.push_back(ly);
    }
    w_.enc_lnf_g = add_gain("enc.lnf.g", de);
    w_.enc_lnf_b = add_b("enc.lnf.b", de);

    w_.dec_tok = add_emb("dec.tok", cfg_.vocab_size, dd);
    w_.dec_pos = add_emb("dec.pos", cfg_.seq_len, dd);
    w_.time_W1 = add_w("time.W1", dd, dd);
    w_.time_b1 = add_b("time.b1", dd);
    w_.time_W2 = add_w("time.W2", dd, dd);
    w_.time_b2 = add_b("time.b2", dd);
    if (de != dd) {
      w_.zproj_W = add_w("dec.zproj.W", de, dd);
      w_.zproj_b = add_b("dec.zproj.b", dd);
    }
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string pre = "dec.L" + std::to_string(l) + ".";
      DecLayer ly;
      ly.ln1_g = add_gain(pre + "ln1.g", dd);
      ly.ln1_b = add_b(pre + "ln1.b", dd);
      ly.Wq = add_w(pre + "attn.Wq", dd, dd); ly.bq = add_b(pre + "attn.bq", dd);
      ly.Wk = add_w(pre + "attn.Wk", dd, dd); ly.bk = add_b(pre + "attn.bk", dd);
      ly.Wv = add_w(pre + "attn.Wv", dd, dd); ly.bv = add_b(pre + "attn.bv", dd);
      ly.Wo = add_w(pre + "attn.Wo", dd, dd); ly.bo = add_b(pre + "attn.bo", dd);
      ly.lnx_g = add_gain(pre + "lnx.g", dd);
      ly.lnx_b = add_b(pre + "lnx.b", dd);
      const int dkv = (de != dd) ? dd : de;
      ly.xWq = add_w(pre + "xattn.Wq", dd, dd); ly.xbq = add_b(pre + "xattn.bq", dd);
      ly.xWk = add_w(pre + "xattn.Wk", dkv, dd); ly.xbk = add_b(pre + "xattn.bk", dd);
      ly.xWv = add_w(pre + "xattn.Wv", dkv, dd); ly.xbv = add_b(pre + "xattn.bv", dd);
      ly.xWo = add_w(pre + "xattn.Wo", dd, dd); ly.xbo = add_b(pre + "xattn.bo", dd);
      ly.ln2_g = add_gain(pre + "ln2.g", dd);
      ly.ln2_b = add_b(pre + "ln2.b", dd);
      ly.W1 = add_w(pre + "mlp.W1", dd, dd * cfg_.mlp_ratio);
      ly.b1 = add_b(pre + "mlp.b1", dd * cfg_.mlp_ratio);
      ly.W2 = add_w(pre + "mlp.W2", dd * cfg_.mlp_ratio, dd);
      ly.b2 = add_b(pre + "mlp.b2", dd);
      w_.dec.push_back(ly);
    }
    w_.dec_lnf_g = add_gain("dec.lnf.g", dd);
    w_.dec_lnf_b = add_b("dec.lnf.b", dd);
    w_.head_char_W = add_w("head.char.W", dd, cfg_.vocab_size);
    w_.head_char_b = add_b("head.char.b", cfg_.vocab_size);
    w_.head_pres_W = add_w("head.pres.W", dd, 1);
    w_.head_pres_b = add_b("head.pres.b", 1);
  }

  ModelConfig cfg_;
  ParamStore<S> store_;
  Weights w_;
  Activation act_ = Activation::Gelu;
};

}  // namespace diffstr
