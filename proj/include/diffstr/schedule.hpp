#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffstr/common.hpp"

namespace diffstr {

enum class ScheduleKind { LinearMask, Cosine };

inline std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::LinearMask ? "linear-mask" : "cosine";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear-mask") return ScheduleKind::LinearMask;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule kind: " + s);
}

/// Per-step corruption probabilities beta_t and survival products
/// alpha_bar_t = prod_{s<=t} (1 - beta_s). Precomputed once; queries are
/// array lookups. Immutable after construction.
template <class S = double>
struct NoiseSchedule {
  int steps = 0;  // T
  ScheduleKind kind = ScheduleKind::LinearMask;
  std::vector<S> betas;       // betas[t-1] = beta_t, t in 1..T
  std::vector<S> alpha_bars;  // alpha_bars[t] = abar_t, t in 0..T; abar_0 = 1

  S beta(int t) const {
    if (t < 1 || t > steps)
      throw StepOutOfRange("beta(t): t=" + std::to_string(t) +
                           " outside [1, " + std::to_string(steps) + "]");
    return betas[static_cast<std::size_t>(t - 1)];
  }
  S alpha(int t) const { return S(1) - beta(t); }
  S alpha_bar(int t) const {
    if (t < 0 || t > steps)
      throw StepOutOfRange("alpha_bar(t): t=" + std::to_string(t) +
                           " outside [0, " + std::to_string(steps) + "]");
    return alpha_bars[static_cast<std::size_t>(t)];
  }
};

/// linear-mask: beta_s = 1/(T-s+1), so abar_t telescopes to exactly 1 - t/T
/// and the chain ends fully corrupted (abar_T = 0).
/// cosine: abar_t = f(t)/f(0) with f(t) = cos^2((t/T + s)/(1+s) * pi/2),
/// s = 0.008; beta derived from consecutive ratios and clipped to <= 0.999,
/// then abar rebuilt as the running product so the recurrence is exact.
template <class S = double>
NoiseSchedule<S> build_schedule(ScheduleKind kind, int T) {
  if (T < 1) throw InvalidT("schedule needs T >= 1, got " + std::to_string(T));
  NoiseSchedule<S> sched;
  sched.steps = T;
  sched.kind = kind;
  sched.betas.resize(static_cast<std::size_t>(T));
  sched.alpha_bars.resize(static_cast<std::size_t>(T) + 1);
  sched.alpha_bars[0] = S(1);

  if (kind == ScheduleKind::LinearMask) {
    for (int t = 1; t <= T; ++t) {
      sched.betas[t - 1] = S(1) / S(T - t + 1);
      sched.alpha_bars[t] = S(T - t) / S(T);
    }
    return sched;
  }

  const double offset = 0.008;
  auto f = [&](int t) {
    const double u = (static_cast<double>(t) / T + offset) / (1.0 + offset);
    const double c = std::cos(u * M_PI / 2.0);
    return c * c;
  };
  const double f0 = f(0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double raw = f(t) / f0;
    double beta = 1.0 - raw / prev;
    if (beta > 0.999) beta = 0.999;
    sched.betas[t - 1] = static_cast<S>(beta);
    sched.alpha_bars[t] = sched.alpha_bars[t - 1] * (S(1) - sched.betas[t - 1]);
    prev = raw;
  }
  return sched;
}

}  // namespace diffstr
