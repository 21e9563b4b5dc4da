#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "diffstr/common.hpp"
#include "diffstr/rng.hpp"
#include "diffstr/schedule.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

/// absorbing: corrupted tokens become MASK and stay MASK.
/// uniform: corrupted tokens are resampled uniformly over all K categories.
enum class KernelKind { Absorbing, Uniform };

inline std::string to_string(KernelKind k) {
  return k == KernelKind::Absorbing ? "absorbing" : "uniform";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "absorbing") return KernelKind::Absorbing;
  if (s == "uniform") return KernelKind::Uniform;
  throw ConfigError("unknown kernel kind: " + s);
}

enum class SampleMode { Sample, Greedy };

/// One categorical distribution per sequence position (L x K, rows sum to 1).
template <class S = double>
using Grid = Mat<S>;

namespace detail {

template <class S>
void check_rows_normalized(const Grid<S>& g) {
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double sum = static_cast<double>(g.row(i).sum());
    if (std::abs(sum - 1.0) > 1e-6)
      throw BadDistribution("x0_dist row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
    if ((g.row(i).array() < S(0)).any())
      throw BadDistribution("x0_dist row " + std::to_string(i) +
                            " has a negative entry");
  }
}

/// Draws from one categorical row via a single uniform variate.
template <class S>
int draw_categorical(const Grid<S>& probs, Eigen::Index row, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const Eigen::Index K = probs.cols();
  for (Eigen::Index c = 0; c < K; ++c) {
    acc += static_cast<double>(probs(row, c));
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(K - 1);  // guard against rounding at acc ~ 1
}

/// Row argmax with ties broken by lowest token id.
template <class S>
int argmax_lowest_id(const Grid<S>& probs, Eigen::Index row) {
  int best = 0;
  S best_p = probs(row, 0);
  for (Eigen::Index c = 1; c < probs.cols(); ++c) {
    if (probs(row, c) > best_p) {
      best_p = probs(row, c);
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace detail

/// Samples x_t ~ q(x_t | x_0) independently per position: keep the token
/// with probability abar_t, otherwise MASK (absorbing) or a uniform draw
/// over all K categories (uniform). t = 0 returns x0 unchanged.
template <class S>
TokenSeq corrupt(const TokenSeq& x0, int t, const NoiseSchedule<S>& sched,
                 KernelKind kernel, int K, int mask_id, Rng& rng) {
  if (t < 0 || t > sched.steps)
    throw StepOutOfRange("corrupt: t=" + std::to_string(t) + " outside [0, " +
                         std::to_string(sched.steps) + "]");
  if (t == 0) return x0;
  const double keep = static_cast<double>(sched.alpha_bar(t));
  TokenSeq xt(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (rng.uniform() < keep) {
      xt[i] = x0[i];
    } else if (kernel == KernelKind::Absorbing) {
      xt[i] = mask_id;
    } else {
      xt[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    }
  }
  return xt;
}

/// Distribution of x_{t-1} given x_t, marginalizing the model's x_0 belief.
///
/// absorbing, x_t[i] != MASK: the token is frozen, row = delta(x_t[i]).
/// absorbing, x_t[i] == MASK: reveal category c with probability
///   x0_dist[i][c] * (abar_{t-1} - abar_t) / (1 - abar_t),
/// stay MASK with probability (1 - abar_{t-1}) / (1 - abar_t).
///
/// uniform: theta[c] propto (alpha_t*[c = x_t[i]] + (1-alpha_t)/K)
///                        * (abar_{t-1}*x0_dist[i][c] + (1-abar_{t-1})/K),
/// normalized per row. This is Bayes' rule with the x_0 belief marginalized
/// inside the prior factor.
template <class S>
Grid<S> posterior_probs(const TokenSeq& xt, const Grid<S>& x0_dist, int t,
                        const NoiseSchedule<S>& sched, KernelKind kernel,
                        int mask_id) {
  if (t < 1 || t > sched.steps)
    throw StepOutOfRange("posterior_probs: t=" + std::to_string(t) +
                         " outside [1, " + std::to_string(sched.steps) + "]");
  const Eigen::Index L = x0_dist.rows();
  const Eigen::Index K = x0_dist.cols();
  if (static_cast<Eigen::Index>(xt.size()) != L)
    throw ShapeMismatch("posterior_probs: x_t length " +
                        std::to_string(xt.size()) + " vs grid rows " +
                        std::to_string(L));
  detail::check_rows_normalized(x0_dist);

  Grid<S> out = Grid<S>::Zero(L, K);
  const S abar_prev = sched.alpha_bar(t - 1);
  const S abar = sched.alpha_bar(t);

  if (kernel == KernelKind::Absorbing) {
    for (Eigen::Index i = 0; i < L; ++i)
      if (x0_dist(i, mask_id) > S(1e-12))
        throw MassOnMask("x0 belief places mass " +
                         std::to_string(static_cast<double>(x0_dist(i, mask_id))) +
                         " on MASK at position " + std::to_string(i));
    const S denom = S(1) - abar;
    const S reveal = (abar_prev - abar) / denom;
    const S stay = (S(1) - abar_prev) / denom;
    for (Eigen::Index i = 0; i < L; ++i) {
      if (xt[static_cast<std::size_t>(i)] != mask_id) {
        out(i, xt[static_cast<std::size_t>(i)]) = S(1);
      } else {
        out.row(i) = x0_dist.row(i) * reveal;
        out(i, mask_id) = stay;
      }
    }
    return out;
  }

  const S alpha = S(1) - sched.beta(t);
  const S mix_t = (S(1) - alpha) / S(K);
  const S mix_prev = (S(1) - abar_prev) / S(K);
  for (Eigen::Index i = 0; i < L; ++i) {
    const int b = xt[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < K; ++c) {
      const S lik = (static_cast<int>(c) == b ? alpha : S(0)) + mix_t;
      const S prior = abar_prev * x0_dist(i, c) + mix_prev;
      out(i, c) = lik * prior;
    }
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Draws x_{t-1} from the posterior rows (Sample) or takes the row argmax
/// with ties broken by lowest token id (Greedy).
template <class S>
TokenSeq reverse_step(const TokenSeq& xt, const Grid<S>& x0_dist, int t,
                      const NoiseSchedule<S>& sched, KernelKind kernel,
                      int mask_id, Rng& rng, SampleMode mode) {
  const Grid<S> post = posterior_probs(xt, x0_dist, t, sched, kernel, mask_id);
  TokenSeq prev(static_cast<std::size_t>(post.rows()));
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    prev[static_cast<std::size_t>(i)] = mode == SampleMode::Sample
                                            ? detail::draw_categorical(post, i, rng)
                                            : detail::argmax_lowest_id(post, i);
  }
  return prev;
}

/// Row-softmax of char logits with the MASK column excluded and the row
/// renormalized: the denoiser's belief about the clean sequence.
template <class S>
Grid<S> x0_belief_from_logits(const Mat<S>& char_logits, int mask_id) {
  const Eigen::Index L = char_logits.rows();
  const Eigen::Index K = char_logits.cols();
  Grid<S> probs(L, K);
  for (Eigen::Index i = 0; i < L; ++i) {
    S mx = std::numeric_limits<S>::lowest();
    for (Eigen::Index c = 0; c < K; ++c)
      if (static_cast<int>(c) != mask_id && char_logits(i, c) > mx)
        mx = char_logits(i, c);
    S sum = S(0);
    for (Eigen::Index c = 0; c < K; ++c) {
      if (static_cast<int>(c) == mask_id) {
        probs(i, c) = S(0);
      } else {
        probs(i, c) = std::exp(char_logits(i, c) - mx);
        sum += probs(i, c);
      }
    }
    probs.row(i) /= sum;
  }
  return probs;
}

/// Full reverse chain. Starts from all-MASK (absorbing) or i.i.d. uniform
/// draws (uniform kernel) and iterates t = T..1. The denoiser maps
/// (x_t, t) to char logits (L x K); conditioning on the image is captured
/// inside the callable. `trace`, when set, observes each intermediate state.
template <class S, class Denoiser>
TokenSeq sample(Denoiser&& denoiser, int L, int K, int mask_id,
                const NoiseSchedule<S>& sched, KernelKind kernel, Rng& rng,
                SampleMode mode,
                const std::function<void(int, const TokenSeq&)>& trace = {}) {
  TokenSeq xt(static_cast<std::size_t>(L));
  if (kernel == KernelKind::Absorbing) {
    std::fill(xt.begin(), xt.end(), mask_id);
  } else {
    for (auto& tok : xt)
      tok = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
  }
  for (int t = sched.steps; t >= 1; --t) {
    const Mat<S> logits = denoiser(xt, t);
    const Grid<S> belief = x0_belief_from_logits(logits, mask_id);
    xt = reverse_step(xt, belief, t, sched, kernel, mask_id, rng, mode);
    if (trace) trace(t, xt);
  }
  return xt;
}

}  // namespace diffstr
