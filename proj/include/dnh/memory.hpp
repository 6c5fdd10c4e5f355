#pragma once

// A single memory level: a square associative map theta plus its local update
// machinery. Levels are stacked by the hierarchy; everything here is strictly
// per-level.

#include "dnh/numerics.hpp"

namespace dnh {

struct MemoryModule {
  int id = 0;     // stable identity, survives re-indexing
  int level = 1;  // position in the stack, 1 = outermost
  Matrix theta;   // d x d associative map
  double freq = 1.0;
  Matrix momentum;     // gradient momentum buffer on theta
  double phase = 0.0;  // scheduler phase accumulator, in [0, 1)
  Vector context;      // last input this level saw
  double last_lss = 0.0;

  MemoryModule() = default;
  MemoryModule(int id_, int level_, int dim, double freq_)
      : id(id_),
        level(level_),
        theta(Matrix::identity(dim)),
        freq(freq_),
        momentum(Matrix::zero(dim, dim)),
        context(dim, 0.0) {}

  int dim() const { return theta.rows; }
};

// One affine layer + tanh that produces a per-coordinate modulation vector
// from (key, value, context); the self-modifying half of a level.
struct MetaNet {
  Vector psi_w;     // 3d weights applied to concat(k, v, c)
  Vector psi_b;     // d biases
  Vector prev_psi;  // snapshot of (w, b) taken when a fit starts

  MetaNet() = default;
  explicit MetaNet(int dim) : psi_w(3 * dim, 0.0), psi_b(dim, 0.0) {}

  int dim() const { return static_cast<int>(psi_b.size()); }
  Vector flat() const { return concat(psi_w, psi_b, {}); }
};

// Scalar surprise gate: alpha = sigmoid(w * lss + b).
struct GateParams {
  double w = 1.0;
  double b = 0.0;
};

// Plain associative recall y = theta * key.
Vector query(const MemoryModule& m, const Vector& key);

// Self-modulated recall: theta*k + dtheta .* v, where
// dtheta_i = tanh(psi_w . concat(k, v, c) + psi_b_i). A zero net reduces this
// to query() exactly.
Vector smm_forward(const MemoryModule& m, const MetaNet& net, const Vector& k, const Vector& v,
                   const Vector& c);

// Objective minimized by meta_net_fit:
//   ||smm_forward(m, net, k, v, c) - v||^2 + beta_reg * ||psi - psi_prev||^2
double meta_net_objective(const MemoryModule& m, const MetaNet& net, const Vector& k,
                          const Vector& v, const Vector& c, double beta_reg,
                          const Vector& psi_prev);

// Analytic gradient of meta_net_objective in (psi_w, psi_b), flattened to 4d.
Vector meta_net_objective_grad(const MemoryModule& m, const MetaNet& net, const Vector& k,
                               const Vector& v, const Vector& c, double beta_reg,
                               const Vector& psi_prev);

// `steps` rounds of gradient descent on meta_net_objective with step size
// eta. The psi_prev snapshot is taken at entry. If the objective ever grows
// past 10x its starting value (plus a small absolute guard) the step size is
// declared divergent and a numeric error is raised.
MetaNet meta_net_fit(const MemoryModule& m, MetaNet net, const Vector& k, const Vector& v,
                     const Vector& c, double beta_reg, double eta, int steps);

// theta <- theta + v k^T + alpha * meta_grad.
void delta_rule_update(MemoryModule& m, const Vector& k, const Vector& v, double alpha,
                       const Matrix& meta_grad);

// sigmoid(w * lss + b), always in (0, 1).
double gate_alpha(const GateParams& g, double lss);

// Local surprise ||query(m, q) - target|| (the gradient magnitude of the
// squared-error level loss at the level's output). Stored in m.last_lss.
double local_surprise(MemoryModule& m, const Vector& q, const Vector& target);

// Gradient of 0.5 * ||theta * input - target||^2 in theta:
// (theta*input - target) * input^T.
Matrix level_loss_grad(const MemoryModule& m, const Vector& input, const Vector& target);

}  // namespace dnh
