#pragma once

// Small dense vector/matrix kit plus the finite-difference and divergence
// helpers the rest of the engine is built on. Dimensions here are tiny
// (d <= a few hundred), so everything is plain row-major loops; clarity and
// reproducible arithmetic order beat throughput.

#include <cmath>
#include <functional>
#include <vector>

#include "dnh/errors.hpp"

namespace dnh {

using Vector = std::vector<double>;

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    require(r >= 0 && c >= 0, ErrorKind::shape, "matrix dims must be non-negative");
  }

  static Matrix identity(int n);
  static Matrix zero(int r, int c) { return Matrix(r, c); }

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

bool operator==(const Matrix& a, const Matrix& b);

// ---- vector ops ----

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);  // Euclidean
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double s);
void axpy(Vector& y, double a, const Vector& x);  // y += a*x
bool all_finite(const Vector& a);
Vector concat(const Vector& a, const Vector& b, const Vector& c);

// ---- matrix ops ----

Vector matvec(const Matrix& m, const Vector& x);
Vector matvec_transposed(const Matrix& m, const Vector& x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
void add_scaled(Matrix& a, double s, const Matrix& b);  // a += s*b
Matrix scaled(const Matrix& a, double s);
double frobenius_norm(const Matrix& m);
double frobenius_inner(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

// Rank-one product u v^T, |u| x |v|.
Matrix outer(const Vector& u, const Vector& v);

// Central finite differences of a scalar function, component i evaluated as
// (f(x + h e_i) - f(x - h e_i)) / (2h). Non-finite function values raise a
// numeric error. The two-argument overload picks a relative step per
// coordinate, h_i = 1e-5 * max(1, |x_i|).
Vector central_fd(const std::function<double(const Vector&)>& fn, const Vector& x, double h);
Vector central_fd(const std::function<double(const Vector&)>& fn, const Vector& x);

// KL divergence between diagonal Gaussians N(mu1, diag(var1)) and
// N(mu2, diag(var2)): sum_i 0.5*(ln(var2/var1) + (var1 + (mu1-mu2)^2)/var2 - 1).
double gaussian_kl(const Vector& mu1, const Vector& var1, const Vector& mu2, const Vector& var2);

// Ordinary least squares for M minimizing sum ||M x_t - y_t||^2 over column
// pairs, via normal equations + Cholesky. If the Gram matrix is numerically
// rank-deficient, a ridge of `ridge` is added and *flagged* through the
// out-parameter. Row-decoupled, so one factorization serves all rows.
Matrix least_squares_fit(const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                         double ridge, bool* used_ridge);

// Slope/intercept of the least-squares line y = a*x + b.
std::pair<double, double> linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace dnh
