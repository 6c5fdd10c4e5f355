#include "dnh/optim.hpp"

#include <algorithm>
#include <cmath>

#include "dnh/errors.hpp"

namespace dnh {

MomentumState proximal_momentum_step(const MomentumState& s, const Matrix& grad) {
  require(s.m.same_shape(grad), ErrorKind::shape, "proximal_momentum_step: shape mismatch");
  require(std::isfinite(s.eta) && s.eta > 0.0, ErrorKind::invalid_argument,
          "proximal_momentum_step: eta must be positive");
  require(all_finite(grad), ErrorKind::numeric, "proximal_momentum_step: non-finite gradient");
  MomentumState out = s;
  add_scaled(out.m, s.eta, grad);
  return out;
}

EAdamState::EAdamState(int rows, int cols, double lr_, double b1, double b2, double eps_)
    : m(Matrix::zero(rows, cols)),
      v(Matrix::zero(rows, cols)),
      beta1(b1),
      beta2(b2),
      lr(lr_),
      eps(eps_) {
  require(lr > 0.0 && std::isfinite(lr), ErrorKind::invalid_argument,
          "eadam: lr must be positive");
  require(eps > 0.0 && std::isfinite(eps), ErrorKind::invalid_argument,
          "eadam: eps must be positive");
  require(b1 >= 0.0 && b1 <= kBetaMax, ErrorKind::invalid_argument,
          "eadam: beta1 outside [0, 1-1e-6]");
  require(b2 >= 0.0 && b2 <= kBetaMax, ErrorKind::invalid_argument,
          "eadam: beta2 outside [0, 1-1e-6]");
}

Matrix eadam_step(EAdamState& s, const Matrix& grad) {
  require(s.m.same_shape(grad) && s.v.same_shape(grad), ErrorKind::shape,
          "eadam_step: shape mismatch");
  require(all_finite(grad), ErrorKind::numeric, "eadam_step: non-finite gradient");
  ++s.step_count;
  size_t n = grad.data.size();
  for (size_t i = 0; i < n; ++i) {
    double g = grad.data[i];
    s.m.data[i] = s.beta1 * s.m.data[i] + (1.0 - s.beta1) * g;
    s.v.data[i] = s.beta2 * s.v.data[i] + (1.0 - s.beta2) * g * g;
  }
  double mc = 1.0, vc = 1.0;
  if (s.bias_correction) {
    mc = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    vc = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  }
  Matrix update(grad.rows, grad.cols);
  for (size_t i = 0; i < n; ++i) {
    double mh = s.m.data[i] / mc;
    double vh = s.v.data[i] / vc;
    update.data[i] = -s.lr * mh / (std::sqrt(vh) + s.eps);
  }
  require(all_finite(update), ErrorKind::numeric, "eadam_step: non-finite update");
  return update;
}

void eadam_evolve(EAdamState& s, double lss, double g1, double g2, double gamma, RngState& rng) {
  require(lss >= 0.0 && std::isfinite(lss), ErrorKind::invalid_argument,
          "eadam_evolve: lss must be >= 0");
  require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::invalid_argument,
          "eadam_evolve: gamma must be >= 0");
  require(s.sigma2 >= 0.0, ErrorKind::invalid_state, "eadam_evolve: negative sigma2");
  require(std::isfinite(g1) && std::isfinite(g2), ErrorKind::numeric,
          "eadam_evolve: non-finite beta gradient");
  double z1 = rng.normal(0.0, s.sigma2);
  double z2 = rng.normal(0.0, s.sigma2);
  s.beta1 = std::clamp(s.beta1 - s.eta_beta * g1 + z1, 0.0, kBetaMax);
  s.beta2 = std::clamp(s.beta2 - s.eta_beta * g2 + z2, 0.0, kBetaMax);
  s.sigma2 *= std::exp(-gamma * lss);
}

}  // namespace dnh
