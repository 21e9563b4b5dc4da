#pragma once

// Brute-force references for the diffusion math, built only from one-step
// transition matrices and explicit matrix products / Bayes enumeration.
// Deliberately independent of the closed forms in diffstr/diffusion.hpp.

#include <Eigen/Dense>

#include "diffstr/diffusion.hpp"
#include "diffstr/schedule.hpp"

namespace oracle {

/// Q_t(i, j) = P(x_t = j | x_{t-1} = i).
inline Eigen::MatrixXd one_step_matrix(const diffstr::NoiseSchedule<double>& sched,
                                       int t, diffstr::KernelKind kernel, int K,
                                       int mask_id) {
  const double beta = sched.beta(t);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K, K);
  if (kernel == diffstr::KernelKind::Absorbing) {
    for (int i = 0; i < K; ++i) {
      if (i == mask_id) {
        Q(i, mask_id) = 1.0;
      } else {
        Q(i, i) = 1.0 - beta;
        Q(i, mask_id) += beta;
      }
    }
  } else {
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        Q(i, j) = beta / K + (i == j ? 1.0 - beta : 0.0);
  }
  return Q;
}

/// qbar_t(i, j) = P(x_t = j | x_0 = i) by chaining one-step matrices.
inline Eigen::MatrixXd marginal_matrix(const diffstr::NoiseSchedule<double>& sched,
                                       int t, diffstr::KernelKind kernel, int K,
                                       int mask_id) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(K, K);
  for (int s = 1; s <= t; ++s) Q *= one_step_matrix(sched, s, kernel, K, mask_id);
  return Q;
}

/// Posterior over x_{t-1} given x_t = b and a belief w over x_0:
/// theta_j \propto q(x_t = b | x_{t-1} = j) * sum_c w_c q(x_{t-1} = j | x_0 = c).
inline Eigen::VectorXd posterior_row(const diffstr::NoiseSchedule<double>& sched,
                                     int t, diffstr::KernelKind kernel, int K,
                                     int mask_id, int b,
                                     const Eigen::VectorXd& w) {
  const Eigen::MatrixXd Qt = one_step_matrix(sched, t, kernel, K, mask_id);
  const Eigen::MatrixXd Qbar = marginal_matrix(sched, t - 1, kernel, K, mask_id);
  const Eigen::VectorXd prior = Qbar.transpose() * w;
  Eigen::VectorXd theta(K);
  for (int j = 0; j < K; ++j) theta(j) = Qt(j, b) * prior(j);
  return theta / theta.sum();
}

/// The closed-form marginal the corruption kernel is supposed to realize.
inline Eigen::MatrixXd closed_form_marginal(const diffstr::NoiseSchedule<double>& sched,
                                            int t, diffstr::KernelKind kernel,
                                            int K, int mask_id) {
  const double abar = sched.alpha_bar(t);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K, K);
  if (kernel == diffstr::KernelKind::Absorbing) {
    for (int i = 0; i < K; ++i) {
      if (i == mask_id) {
        Q(i, mask_id) = 1.0;
      } else {
        Q(i, i) = abar;
        Q(i, mask_id) += 1.0 - abar;
      }
    }
  } else {
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        Q(i, j) = (1.0 - abar) / K + (i == j ? abar : 0.0);
  }
  return Q;
}

}  // namespace oracle
