#include "dnh/memory.hpp"

#include <algorithm>
#include <cmath>

namespace dnh {

Vector query(const MemoryModule& m, const Vector& key) {
  require(static_cast<int>(key.size()) == m.dim(), ErrorKind::shape, "query: key dim mismatch");
  return matvec(m.theta, key);
}

namespace {

void check_kvc(const MemoryModule& m, const Vector& k, const Vector& v, const Vector& c) {
  size_t d = static_cast<size_t>(m.dim());
  require(k.size() == d && v.size() == d && c.size() == d, ErrorKind::shape,
          "smm: k/v/c must all have the module dim");
}

// Shared forward pieces: s = psi_w . concat(k,v,c), a_i = s + psi_b_i.
double net_drive(const MetaNet& net, const Vector& k, const Vector& v, const Vector& c) {
  require(net.psi_w.size() == 3 * net.psi_b.size(), ErrorKind::shape,
          "meta net: psi_w must be 3x psi_b");
  return dot(net.psi_w, concat(k, v, c));
}

}  // namespace

Vector smm_forward(const MemoryModule& m, const MetaNet& net, const Vector& k, const Vector& v,
                   const Vector& c) {
  check_kvc(m, k, v, c);
  require(net.dim() == m.dim(), ErrorKind::shape, "smm: net dim mismatch");
  double s = net_drive(net, k, v, c);
  Vector y = matvec(m.theta, k);
  for (int i = 0; i < m.dim(); ++i) y[i] += std::tanh(s + net.psi_b[i]) * v[i];
  return y;
}

double meta_net_objective(const MemoryModule& m, const MetaNet& net, const Vector& k,
                          const Vector& v, const Vector& c, double beta_reg,
                          const Vector& psi_prev) {
  Vector y = smm_forward(m, net, k, v, c);
  Vector r = sub(y, v);
  double obj = dot(r, r);
  Vector psi = net.flat();
  require(psi.size() == psi_prev.size(), ErrorKind::shape, "meta net: psi_prev size mismatch");
  Vector dpsi = sub(psi, psi_prev);
  return obj + beta_reg * dot(dpsi, dpsi);
}

Vector meta_net_objective_grad(const MemoryModule& m, const MetaNet& net, const Vector& k,
                               const Vector& v, const Vector& c, double beta_reg,
                               const Vector& psi_prev) {
  check_kvc(m, k, v, c);
  int d = m.dim();
  Vector z = concat(k, v, c);
  double s = net_drive(net, k, v, c);
  Vector y = matvec(m.theta, k);
  // r_i = theta*k + tanh(a_i) v_i - v_i, dJ/da_i = 2 r_i v_i (1 - tanh(a_i)^2)
  Vector grad(4 * static_cast<size_t>(d), 0.0);
  double dsum = 0.0;
  for (int i = 0; i < d; ++i) {
    double th = std::tanh(s + net.psi_b[i]);
    double r = y[i] + th * v[i] - v[i];
    double da = 2.0 * r * v[i] * (1.0 - th * th);
    grad[3 * d + i] = da;  // psi_b part
    dsum += da;
  }
  for (int j = 0; j < 3 * d; ++j) grad[j] = dsum * z[j];  // psi_w part
  Vector psi = net.flat();
  require(psi.size() == psi_prev.size(), ErrorKind::shape, "meta net: psi_prev size mismatch");
  for (size_t j = 0; j < psi.size(); ++j) grad[j] += 2.0 * beta_reg * (psi[j] - psi_prev[j]);
  return grad;
}

MetaNet meta_net_fit(const MemoryModule& m, MetaNet net, const Vector& k, const Vector& v,
                     const Vector& c, double beta_reg, double eta, int steps) {
  require(eta > 0.0 && std::isfinite(eta), ErrorKind::invalid_argument,
          "meta_net_fit: eta must be > 0");
  require(steps >= 0, ErrorKind::invalid_argument, "meta_net_fit: steps must be >= 0");
  require(beta_reg >= 0.0, ErrorKind::invalid_argument, "meta_net_fit: beta_reg must be >= 0");
  net.prev_psi = net.flat();
  int d = m.dim();
  double start = meta_net_objective(m, net, k, v, c, beta_reg, net.prev_psi);
  double guard = 10.0 * start + 1e-9;
  for (int it = 0; it < steps; ++it) {
    Vector g = meta_net_objective_grad(m, net, k, v, c, beta_reg, net.prev_psi);
    for (int j = 0; j < 3 * d; ++j) net.psi_w[j] -= eta * g[j];
    for (int i = 0; i < d; ++i) net.psi_b[i] -= eta * g[3 * d + i];
    double obj = meta_net_objective(m, net, k, v, c, beta_reg, net.prev_psi);
    require(std::isfinite(obj) && obj <= guard, ErrorKind::numeric,
            "meta_net_fit: objective diverged, step size too large");
  }
  return net;
}

void delta_rule_update(MemoryModule& m, const Vector& k, const Vector& v, double alpha,
                       const Matrix& meta_grad) {
  size_t d = static_cast<size_t>(m.dim());
  require(k.size() == d && v.size() == d, ErrorKind::shape, "delta_rule: k/v dim mismatch");
  require(meta_grad.rows == m.dim() && meta_grad.cols == m.dim(), ErrorKind::shape,
          "delta_rule: meta_grad shape mismatch");
  Matrix kv = outer(v, k);
  add_scaled(m.theta, 1.0, kv);
  add_scaled(m.theta, alpha, meta_grad);
  require(all_finite(m.theta), ErrorKind::numeric, "delta_rule: theta became non-finite");
}

double gate_alpha(const GateParams& g, double lss) {
  require(std::isfinite(lss), ErrorKind::invalid_argument, "gate_alpha: lss must be finite");
  double a = g.w * lss + g.b;
  double s = 1.0 / (1.0 + std::exp(-a));
  // exp saturates for |a| beyond ~745; keep the documented open interval.
  return std::clamp(s, 1e-15, 1.0 - 1e-15);
}

double local_surprise(MemoryModule& m, const Vector& q, const Vector& target) {
  require(q.size() == target.size(), ErrorKind::shape, "local_surprise: size mismatch");
  Vector y = query(m, q);
  double s = norm(sub(y, target));
  m.last_lss = s;
  return s;
}

Matrix level_loss_grad(const MemoryModule& m, const Vector& input, const Vector& target) {
  require(input.size() == target.size(), ErrorKind::shape, "level_loss_grad: size mismatch");
  Vector r = sub(matvec(m.theta, input), target);
  return outer(r, input);
}

}  // namespace dnh
