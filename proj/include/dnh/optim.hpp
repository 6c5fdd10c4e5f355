#pragma once

// Optimizers treated as evolvable components: a proximal momentum buffer and
// an Adam variant whose beta coefficients drift over time.

#include "dnh/numerics.hpp"
#include "dnh/rng.hpp"

namespace dnh {

// Momentum buffer with a fixed step size eta. The step below is the closed
// form of argmin_m' -<m', grad> + ||m' - m||^2 / (2 eta).
struct MomentumState {
  Matrix m;
  double eta = 0.1;

  MomentumState() = default;
  MomentumState(int rows, int cols, double eta_) : m(Matrix::zero(rows, cols)), eta(eta_) {}
};

// m' = m + eta * grad. Pure; shape mismatch is a shape error.
MomentumState proximal_momentum_step(const MomentumState& s, const Matrix& grad);

constexpr double kBetaMax = 1.0 - 1e-6;

struct EAdamState {
  Matrix m;  // first moment
  Matrix v;  // second moment, elementwise
  double beta1 = 0.9;
  double beta2 = 0.999;
  double sigma2 = 0.0;    // exploration noise variance on the betas
  double eta_beta = 0.0;  // descent step on the betas
  long step_count = 0;
  double lr = 0.01;
  double eps = 1e-8;
  bool bias_correction = true;

  EAdamState() = default;
  EAdamState(int rows, int cols, double lr_, double b1, double b2, double eps_);
};

// One Adam step: advances the moments and step_count, returns the parameter
// update -lr * mhat / (sqrt(vhat) + eps). Bias correction (the hat terms) can
// be switched off via the state flag, in which case the raw moments are used.
Matrix eadam_step(EAdamState& s, const Matrix& grad);

// Drifts the betas: beta_i <- clamp(beta_i - eta_beta * g_i + zeta_i, 0,
// 1 - 1e-6) with zeta_i ~ N(0, sigma2) drawn from rng, then decays the
// exploration variance, sigma2 <- sigma2 * exp(-gamma * lss). g1, g2 are
// externally estimated loss gradients in beta1, beta2.
void eadam_evolve(EAdamState& s, double lss, double g1, double g2, double gamma, RngState& rng);

}  // namespace dnh
