#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "diffstr/common.hpp"
#include "diffstr/data.hpp"
#include "diffstr/diffusion.hpp"
#include "diffstr/model.hpp"
#include "diffstr/rng.hpp"
#include "diffstr/schedule.hpp"
#include "diffstr/tape.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

struct TrainConfig {
  int epochs = 30;
  int warmup_epochs = 3;
  double peak_lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 64;
  double lambda_presence = 1.0;
  double lambda_simple = 0.0;
  double clip_norm = 1.0;
  double adam_eps = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || warmup_epochs < 0 || warmup_epochs >= epochs)
      throw ConfigError("need 0 <= warmup_epochs < epochs");
    if (lambda_presence < 0 || lambda_simple < 0 || weight_decay < 0)
      throw ConfigError("loss weights and weight decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

/// Linear ramp 0 -> peak over warmup_steps, then cosine decay to 0 at
/// total_steps. Both sides of the junction equal peak.
inline double lr_at(std::int64_t step, std::int64_t total_steps,
                    std::int64_t warmup_steps, double peak_lr) {
  if (step < warmup_steps)
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

/// Uniform diffusion step in {1..T}.
inline int sample_timestep(Rng& rng, int T) {
  return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
}

struct LossBreakdown {
  double total = 0;
  double ce = 0;
  double bce = 0;
  double mse = 0;
};

template <class S>
struct LossResult {
  Var<S> total;
  LossBreakdown parts;
};

/// loss = CE(char logits vs x0) + lambda_presence * BCE(presence logits vs
/// presence targets) + lambda_simple * MSE(softmax(char logits) vs one-hot).
/// All terms are means over every position; the targets are always the
/// clean x0, whatever the corruption level of the input was.
template <class S>
LossResult<S> training_loss(typename Model<S>::Output out,
                            const std::vector<int>& x0_flat,
                            const std::vector<std::uint8_t>& presence_flat,
                            const TrainConfig& cfg) {
  if (out.char_logits.rows() != static_cast<Eigen::Index>(x0_flat.size()) ||
      out.presence.rows() != static_cast<Eigen::Index>(presence_flat.size()))
    throw ShapeMismatch("training_loss: target sizes do not match logits");
  Var<S> ce = softmax_ce_mean(out.char_logits, x0_flat);
  Var<S> bce = bce_logits_mean(out.presence, presence_flat);
  Var<S> mse = mse_softmax_onehot_mean(out.char_logits, x0_flat);
  Var<S> total =
      ce + scale(bce, cfg.lambda_presence) + scale(mse, cfg.lambda_simple);
  LossBreakdown parts;
  parts.ce = static_cast<double>(ce.scalar());
  parts.bce = static_cast<double>(bce.scalar());
  parts.mse = static_cast<double>(mse.scalar());
  parts.total = static_cast<double>(total.scalar());
  return LossResult<S>{total, parts};
}

/// Scales all gradients so their global norm is at most max_norm.
template <class S>
double clip_grad_norm(ParamStore<S>& store, double max_norm) {
  const double norm = std::sqrt(store.grad_sq_norm());
  if (norm > max_norm && norm > 0) {
    const S f = static_cast<S>(max_norm / norm);
    for (int i = 0; i < store.size(); ++i) store.entry(i).grad *= f;
  }
  return norm;
}

/// One decoupled-weight-decay adaptive-moment update. step_num is 1-based
/// for bias correction.
template <class S>
void adamw_step(ParamStore<S>& store, double lr, const TrainConfig& cfg,
                std::int64_t step_num) {
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step_num));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step_num));
  const S b1 = static_cast<S>(cfg.adam_beta1), b2 = static_cast<S>(cfg.adam_beta2);
  for (int i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    e.adam_m = b1 * e.adam_m + (S(1) - b1) * e.grad;
    e.adam_v = (b2 * e.adam_v.array() +
                (S(1) - b2) * e.grad.array().square())
                   .matrix();
    Mat<S> update =
        ((e.adam_m.array() / static_cast<S>(bc1)) /
         ((e.adam_v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(cfg.adam_eps)))
            .matrix();
    if (e.decay)
      e.value.array() -= static_cast<S>(lr * cfg.weight_decay) * e.value.array();
    e.value -= static_cast<S>(lr) * update;
  }
}

struct StepMetrics {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0;
  LossBreakdown loss;
  double grad_norm = 0;
};

/// The training protocol: per-sample random time step, forward corruption,
/// batched denoiser pass, composite loss against the clean targets, one
/// optimizer step. Single writer of the model parameters.
template <class S>
class Trainer {
 public:
  Trainer(Model<S>& model, Vocabulary vocab, NoiseSchedule<double> sched,
          KernelKind kernel, TrainConfig cfg)
      : model_(model),
        vocab_(std::move(vocab)),
        sched_(std::move(sched)),
        kernel_(kernel),
        cfg_(cfg),
        diff_rng_(derive_seed(cfg.seed, 0x0d1f)),
        dropout_rng_(derive_seed(cfg.seed, 0xd0d0)) {
    cfg_.validate();
    if (model_.config().max_step != sched_.steps)
      throw ConfigError("model max_step != schedule T");
  }

  std::int64_t steps_per_epoch(std::size_t n_samples) const {
    return static_cast<std::int64_t>(
        (n_samples + static_cast<std::size_t>(cfg_.batch_size) - 1) /
        static_cast<std::size_t>(cfg_.batch_size));
  }

  /// One optimizer step on an explicit batch.
  StepMetrics step(const std::vector<const LabeledSample*>& batch,
                   std::int64_t total_steps, std::int64_t warmup_steps) {
    if (batch.empty()) throw ConfigError("training step on an empty batch");
    const int L = model_.config().seq_len;
    const int K = model_.config().vocab_size;
    const int B = static_cast<int>(batch.size());

    std::vector<Image> images;
    std::vector<TokenSeq> xts;
    std::vector<int> ts;
    std::vector<int> x0_flat;
    std::vector<std::uint8_t> presence_flat;
    images.reserve(static_cast<std::size_t>(B));
    xts.reserve(static_cast<std::size_t>(B));
    x0_flat.reserve(static_cast<std::size_t>(B) * L);
    for (const LabeledSample* s : batch) {
      const TokenSeq x0 = encode_label(s->label, vocab_, L);
      const int t = sample_timestep(diff_rng_, sched_.steps);
      xts.push_back(corrupt(x0, t, sched_, kernel_, K, vocab_.mask(), diff_rng_));
      ts.push_back(t);
      images.push_back(s->image);
      const auto pres = presence_targets(x0, vocab_);
      x0_flat.insert(x0_flat.end(), x0.begin(), x0.end());
      presence_flat.insert(presence_flat.end(), pres.begin(), pres.end());
    }

    Tape<S> tape;
    Var<S> z = model_.encode(tape, images, dropout_rng());
    typename Model<S>::Output out = model_.decode(tape, z, xts, ts, dropout_rng());
    LossResult<S> loss = training_loss<S>(out, x0_flat, presence_flat, cfg_);
    if (!std::isfinite(loss.parts.total))
      throw NonFiniteLoss("non-finite loss at step " +
                          std::to_string(step_count_) + " (ce=" +
                          std::to_string(loss.parts.ce) + ", bce=" +
                          std::to_string(loss.parts.bce) + ", mse=" +
                          std::to_string(loss.parts.mse) + ")");

    model_.params().zero_grads();
    tape.backward(loss.total);
    tape.accumulate_param_grads(model_.params());
    const double gnorm = clip_grad_norm(model_.params(), cfg_.clip_norm);
    const double lr = lr_at(step_count_, total_steps, warmup_steps, cfg_.peak_lr);
    adamw_step(model_.params(), lr, cfg_, step_count_ + 1);
    ++step_count_;

    StepMetrics m;
    m.step = step_count_;
    m.lr = lr;
    m.loss = loss.parts;
    m.grad_norm = gnorm;
    return m;
  }

  /// Full epoch loop. Sample order per epoch is a Fisher-Yates shuffle
  /// seeded by (seed, epoch), independent of any other randomness.
  void run(const std::vector<LabeledSample>& data,
           const std::function<void(const StepMetrics&)>& on_step = {}) {
    if (data.empty()) throw ConfigError("training on an empty dataset");
    const std::int64_t per_epoch = steps_per_epoch(data.size());
    const std::int64_t total = per_epoch * cfg_.epochs;
    const std::int64_t warmup = per_epoch * cfg_.warmup_epochs;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      Rng shuffle_rng(derive_seed(cfg_.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
      for (std::size_t i = data.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);
      for (std::size_t start = 0; start < data.size();
           start += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t end =
            std::min(data.size(), start + static_cast<std::size_t>(cfg_.batch_size));
        std::vector<const LabeledSample*> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
        StepMetrics m = step(batch, total, warmup);
        m.epoch = epoch;
        if (on_step) on_step(m);
      }
    }
  }

  std::int64_t step_count() const { return step_count_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  Rng* dropout_rng() {
    return model_.config().dropout > 0.0 ? &dropout_rng_ : nullptr;
  }

  Model<S>& model_;
  Vocabulary vocab_;
  NoiseSchedule<double> sched_;
  KernelKind kernel_;
  TrainConfig cfg_;
  Rng diff_rng_;
  Rng dropout_rng_;
  std::int64_t step_count_ = 0;
};

}  // namespace diffstr
