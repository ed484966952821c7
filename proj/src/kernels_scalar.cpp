// Scalar reference kernels. These define the semantics; the AVX2 variants in
// kernels_avx2.cpp must match them (bit-identical for the elementwise ops,
// within a small relative tolerance for reductions and transcendentals).

#include "fr3e/kernels.hpp"

#include <cassert>
#include <cfloat>
#include <cmath>

namespace fr3e::kernels::scalar {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::fma(a, x[i], y[i]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double reduce_sum(std::span<const double> x) {
  double s = 0.0;
  for (const double v : x) s += v;
  return s;
}

double reduce_max(std::span<const double> x) {
  assert(!x.empty());
  double m = x[0];
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out) {
  assert(x.size() == out.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - shift);
    s += out[i];
  }
  return s;
}

void normalize(std::span<const double> e, double sum, std::span<double> p) {
  assert(e.size() == p.size());
  for (std::size_t i = 0; i < e.size(); ++i) p[i] = e[i] / sum;
}

double entropy(std::span<const double> p) {
  // Convention 0 * ln 0 = 0; entries below the smallest normal double are
  // treated as zero so both backends skip exactly the same terms.
  double h = 0.0;
  for (const double v : p) {
    if (v >= DBL_MIN) h -= v * std::log(v);
  }
  return h;
}

void relu(std::span<const double> x, std::span<double> out) {
  assert(x.size() == out.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr) {
  assert(params.size() == grad.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] = std::fma(-lr, grad[i], params[i]);
}

void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps) {
  assert(params.size() == grad.size());
  assert(params.size() == m.size() && params.size() == v.size());
  assert(step >= 1);
  const double c1 = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(step)));
  const double c2 = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

}  // namespace fr3e::kernels::scalar
