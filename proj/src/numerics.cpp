#include "dnh/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace dnh {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

double dot(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::shape, "dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

Vector add(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::shape, "add: size mismatch");
  Vector r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vector sub(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::shape, "sub: size mismatch");
  Vector r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vector scale(const Vector& a, double s) {
  Vector r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

void axpy(Vector& y, double a, const Vector& x) {
  require(y.size() == x.size(), ErrorKind::shape, "axpy: size mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

bool all_finite(const Vector& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

Vector concat(const Vector& a, const Vector& b, const Vector& c) {
  Vector r;
  r.reserve(a.size() + b.size() + c.size());
  r.insert(r.end(), a.begin(), a.end());
  r.insert(r.end(), b.begin(), b.end());
  r.insert(r.end(), c.begin(), c.end());
  return r;
}

Vector matvec(const Matrix& m, const Vector& x) {
  require(static_cast<size_t>(m.cols) == x.size(), ErrorKind::shape, "matvec: size mismatch");
  Vector y(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_transposed(const Matrix& m, const Vector& x) {
  require(static_cast<size_t>(m.rows) == x.size(), ErrorKind::shape,
          "matvec_transposed: size mismatch");
  Vector y(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) y[j] += m(i, j) * x[i];
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, ErrorKind::shape, "matmul: size mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), ErrorKind::shape, "matrix add: shape mismatch");
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), ErrorKind::shape, "matrix sub: shape mismatch");
  Matrix c = a;
  for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

void add_scaled(Matrix& a, double s, const Matrix& b) {
  require(a.same_shape(b), ErrorKind::shape, "add_scaled: shape mismatch");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += s * b.data[i];
}

Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), ErrorKind::shape, "frobenius_inner: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix outer(const Vector& u, const Vector& v) {
  Matrix m(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (size_t i = 0; i < u.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
  return m;
}

namespace {

double eval_checked(const std::function<double(const Vector&)>& fn, const Vector& x) {
  double v = fn(x);
  require(std::isfinite(v), ErrorKind::numeric, "central_fd: non-finite function value");
  return v;
}

}  // namespace

Vector central_fd(const std::function<double(const Vector&)>& fn, const Vector& x, double h) {
  require(h > 0.0 && std::isfinite(h), ErrorKind::invalid_argument, "central_fd: h must be > 0");
  require(all_finite(x), ErrorKind::numeric, "central_fd: non-finite input");
  Vector g(x.size());
  Vector p = x;
  for (size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    double fp = eval_checked(fn, p);
    p[i] = x[i] - h;
    double fm = eval_checked(fn, p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector central_fd(const std::function<double(const Vector&)>& fn, const Vector& x) {
  require(all_finite(x), ErrorKind::numeric, "central_fd: non-finite input");
  Vector g(x.size());
  Vector p = x;
  for (size_t i = 0; i < x.size(); ++i) {
    double h = 1e-5 * std::max(1.0, std::fabs(x[i]));
    p[i] = x[i] + h;
    double fp = eval_checked(fn, p);
    p[i] = x[i] - h;
    double fm = eval_checked(fn, p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double gaussian_kl(const Vector& mu1, const Vector& var1, const Vector& mu2, const Vector& var2) {
  require(mu1.size() == var1.size() && mu1.size() == mu2.size() && mu1.size() == var2.size(),
          ErrorKind::shape, "gaussian_kl: size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < mu1.size(); ++i) {
    require(var1[i] > 0.0 && var2[i] > 0.0, ErrorKind::invalid_argument,
            "gaussian_kl: variances must be positive");
    double dm = mu1[i] - mu2[i];
    kl += 0.5 * (std::log(var2[i] / var1[i]) + (var1[i] + dm * dm) / var2[i] - 1.0);
  }
  return kl;
}

namespace {

// Cholesky factorization in place; returns false if a pivot is not positive.
bool cholesky(Matrix& a) {
  int n = a.rows;
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (d <= 0.0 || !std::isfinite(d)) return false;
    double l = std::sqrt(d);
    a(j, j) = l;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  return true;
}

Vector cholesky_solve(const Matrix& l, const Vector& b) {
  int n = l.rows;
  Vector y(n), x(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

}  // namespace

Matrix least_squares_fit(const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                         double ridge, bool* used_ridge) {
  require(!xs.empty() && xs.size() == ys.size(), ErrorKind::invalid_argument,
          "least_squares_fit: need matching non-empty sample sets");
  int d_in = static_cast<int>(xs[0].size());
  int d_out = static_cast<int>(ys[0].size());
  Matrix gram(d_in, d_in);
  Matrix xty(d_in, d_out);  // X^T Y
  for (size_t t = 0; t < xs.size(); ++t) {
    const Vector& x = xs[t];
    const Vector& y = ys[t];
    require(static_cast<int>(x.size()) == d_in && static_cast<int>(y.size()) == d_out,
            ErrorKind::shape, "least_squares_fit: inconsistent sample sizes");
    for (int i = 0; i < d_in; ++i) {
      for (int j = 0; j < d_in; ++j) gram(i, j) += x[i] * x[j];
      for (int j = 0; j < d_out; ++j) xty(i, j) += x[i] * y[j];
    }
  }
  if (used_ridge) *used_ridge = false;
  Matrix chol = gram;
  if (!cholesky(chol)) {
    if (used_ridge) *used_ridge = true;
    chol = gram;
    for (int i = 0; i < d_in; ++i) chol(i, i) += ridge;
    require(cholesky(chol), ErrorKind::numeric, "least_squares_fit: singular even with ridge");
  }
  // Solve gram * m_row = xty_col for each output dim; M is d_out x d_in.
  Matrix m(d_out, d_in);
  Vector col(d_in);
  for (int j = 0; j < d_out; ++j) {
    for (int i = 0; i < d_in; ++i) col[i] = xty(i, j);
    Vector sol = cholesky_solve(chol, col);
    for (int i = 0; i < d_in; ++i) m(j, i) = sol[i];
  }
  return m;
}

std::pair<double, double> linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), ErrorKind::shape, "linear_fit: size mismatch");
  require(xs.size() >= 2, ErrorKind::insufficient_data, "linear_fit: need at least 2 points");
  double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double denom = n * sxx - sx * sx;
  require(std::fabs(denom) > 1e-300, ErrorKind::numeric, "linear_fit: degenerate abscissae");
  double a = (n * sxy - sx * sy) / denom;
  double b = (sy - a * sx) / n;
  return {a, b};
}

}  // namespace dnh
