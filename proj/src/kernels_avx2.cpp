// AVX2+FMA kernel variants. Same contracts as the scalar reference; the
// elementwise kernels are bit-identical to scalar, reductions and the
// transcendental kernels agree within a few ulp (see tests/test_kernels.cpp).

#include "fr3e/kernels.hpp"

#include <immintrin.h>

#include <cassert>
#include <cmath>

namespace fr3e::kernels::avx2 {

namespace {

// ---------------------------------------------------------------------------
// vec_exp_pd: exp(x) for 4 doubles.
// Cody-Waite range reduction x = n*ln2 + r, degree-13 Taylor on r, then
// scaling by 2^n through the exponent field. Arguments below -708 flush to
// zero, above 709 saturate to +inf. Max observed error ~1 ulp.
// ---------------------------------------------------------------------------

const __m256d kExpLo = _mm256_set1_pd(-708.0);
const __m256d kExpHi = _mm256_set1_pd(709.0);
const __m256d kLog2e = _mm256_set1_pd(1.4426950408889634074);
const __m256d kLn2Hi = _mm256_set1_pd(6.93147180369123816490e-01);
const __m256d kLn2Lo = _mm256_set1_pd(1.90821492927058770002e-10);

inline __m256d vec_exp_pd(__m256d x) {
  const __m256d under = _mm256_cmp_pd(x, kExpLo, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, kExpHi, _CMP_GT_OQ);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, kExpLo), kExpHi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, kLog2e),
                                    _MM_FROUND_TO_NEAREST_INT |
                                        _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, kLn2Hi, xc);
  r = _mm256_fnmadd_pd(n, kLn2Lo, r);

  // Horner over 1/k! for k = 13 .. 0.
  __m256d p = _mm256_set1_pd(1.6059043836821613e-10);   // 1/13!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868100e-09));  // 1/12!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441720e-08));  // 1/11!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985888e-07));  // 1/10!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985893e-06));  // 1/9!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587302e-05));  // 1/8!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841e-04));  // 1/7!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889e-03));  // 1/6!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333333e-03));  // 1/5!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666667e-02));  // 1/4!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666667e-01));  // 1/3!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0e-01));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^n via the exponent field; |n| <= 1024 here so int32 is enough.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i expo =
      _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  const __m256d scale = _mm256_castsi256_pd(expo);
  __m256d result = _mm256_mul_pd(p, scale);

  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), under);
  result = _mm256_blendv_pd(
      result, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  return result;
}

// ---------------------------------------------------------------------------
// vec_log_pd: ln(x) for 4 normal positive doubles.
// x = m * 2^e with m in [sqrt(1/2), sqrt(2)); ln m = 2 atanh(s) with
// s = (m-1)/(m+1) evaluated as an odd series in s up to s^17.
// Callers mask out non-positive and denormal lanes.
// ---------------------------------------------------------------------------

const __m256d kSqrt2 = _mm256_set1_pd(1.4142135623730951);
const __m256i kMagic = _mm256_set1_epi64x(0x4330000000000000LL);  // 2^52

inline __m256d vec_log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  // Biased exponent as a double via the 2^52 trick.
  const __m256i biased = _mm256_srli_epi64(bits, 52);
  const __m256d e_raw = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(biased, kMagic)),
      _mm256_castsi256_pd(kMagic));
  // Mantissa remapped into [1, 2).
  const __m256i mant = _mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
      _mm256_set1_epi64x(0x3ff0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mant);
  __m256d e = _mm256_sub_pd(e_raw, _mm256_set1_pd(1023.0));
  // Fold m > sqrt(2) down so s stays small.
  const __m256d fold = _mm256_cmp_pd(m, kSqrt2, _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), fold);
  e = _mm256_blendv_pd(e, _mm256_add_pd(e, _mm256_set1_pd(1.0)), fold);

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d w = _mm256_mul_pd(s, s);

  __m256d t = _mm256_set1_pd(1.0 / 17.0);
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 15.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 13.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 11.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 9.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 7.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 5.0));
  t = _mm256_fmadd_pd(t, w, _mm256_set1_pd(1.0 / 3.0));
  t = _mm256_mul_pd(t, w);

  const __m256d two_s = _mm256_add_pd(s, s);
  // ln m = 2s + 2s*t; ln x = e*ln2_hi + (ln m + e*ln2_lo).
  const __m256d log_m = _mm256_fmadd_pd(two_s, t, two_s);
  const __m256d lo = _mm256_fmadd_pd(e, kLn2Lo, log_m);
  return _mm256_fmadd_pd(e, kLn2Hi, lo);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s2 = _mm_add_pd(lo, hi);
  const __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
  return _mm_cvtsd_f64(s1);
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m2 = _mm_max_pd(lo, hi);
  const __m128d m1 = _mm_max_sd(m2, _mm_unpackhi_pd(m2, m2));
  return _mm_cvtsd_f64(m1);
}

}  // namespace

double exp_ref(double x) {
  alignas(32) double buf[4] = {x, x, x, x};
  _mm256_store_pd(buf, vec_exp_pd(_mm256_load_pd(buf)));
  return buf[0];
}

double log_ref(double x) {
  alignas(32) double buf[4] = {x, x, x, x};
  _mm256_store_pd(buf, vec_log_pd(_mm256_load_pd(buf)));
  return buf[0];
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(&x[i]);
    const __m256d yv = _mm256_loadu_pd(&y[i]);
    _mm256_storeu_pd(&y[i], _mm256_fmadd_pd(av, xv, yv));
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double reduce_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(&x[i]));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_max(std::span<const double> x) {
  assert(!x.empty());
  const std::size_t n = x.size();
  double m = x[0];
  std::size_t i = 0;
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(&x[0]);
    for (i = 4; i + 4 <= n; i += 4)
      acc = _mm256_max_pd(acc, _mm256_loadu_pd(&x[i]));
    m = hmax(acc);
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out) {
  assert(x.size() == out.size());
  const std::size_t n = x.size();
  const __m256d sv = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = vec_exp_pd(_mm256_sub_pd(_mm256_loadu_pd(&x[i]), sv));
    _mm256_storeu_pd(&out[i], e);
    acc = _mm256_add_pd(acc, e);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    out[i] = exp_ref(x[i] - shift);
    s += out[i];
  }
  return s;
}

void normalize(std::span<const double> e, double sum, std::span<double> p) {
  assert(e.size() == p.size());
  const std::size_t n = e.size();
  const __m256d sv = _mm256_set1_pd(sum);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(&p[i], _mm256_div_pd(_mm256_loadu_pd(&e[i]), sv));
  for (; i < n; ++i) p[i] = e[i] / sum;
}

double entropy(std::span<const double> p) {
  const std::size_t n = p.size();
  // Lanes below the normal range contribute nothing; this also keeps
  // vec_log_pd away from zero and denormal inputs.
  const __m256d tiny = _mm256_set1_pd(2.2250738585072014e-308);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pv = _mm256_loadu_pd(&p[i]);
    const __m256d small = _mm256_cmp_pd(pv, tiny, _CMP_LT_OQ);
    const __m256d safe = _mm256_blendv_pd(pv, one, small);
    const __m256d term = _mm256_mul_pd(pv, vec_log_pd(safe));
    acc = _mm256_sub_pd(acc, _mm256_andnot_pd(small, term));
  }
  double h = hsum(acc);
  for (; i < n; ++i) {
    if (p[i] >= 2.2250738585072014e-308) h -= p[i] * log_ref(p[i]);
  }
  return h;
}

void relu(std::span<const double> x, std::span<double> out) {
  assert(x.size() == out.size());
  const std::size_t n = x.size();
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(&out[i], _mm256_max_pd(_mm256_loadu_pd(&x[i]), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr) {
  assert(params.size() == grad.size());
  const std::size_t n = params.size();
  const __m256d nlr = _mm256_set1_pd(-lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d pv = _mm256_loadu_pd(&params[i]);
    const __m256d gv = _mm256_loadu_pd(&grad[i]);
    _mm256_storeu_pd(&params[i], _mm256_fmadd_pd(nlr, gv, pv));
  }
  for (; i < n; ++i) params[i] = std::fma(-lr, grad[i], params[i]);
}

void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps) {
  assert(params.size() == grad.size());
  assert(params.size() == m.size() && params.size() == v.size());
  const std::size_t n = params.size();
  const double c1s = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(step)));
  const double c2s = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(step)));
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d c1 = _mm256_set1_pd(c1s);
  const __m256d c2 = _mm256_set1_pd(c2s);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(&grad[i]);
    __m256d mv = _mm256_loadu_pd(&m[i]);
    __m256d vv = _mm256_loadu_pd(&v[i]);
    mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(ob1, gv));
    // ((1-b2)*g)*g, matching the scalar expression's left associativity.
    vv = _mm256_add_pd(_mm256_mul_pd(b2, vv),
                       _mm256_mul_pd(_mm256_mul_pd(ob2, gv), gv));
    _mm256_storeu_pd(&m[i], mv);
    _mm256_storeu_pd(&v[i], vv);
    const __m256d denom =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, c2)), epsv);
    const __m256d upd =
        _mm256_div_pd(_mm256_mul_pd(lrv, _mm256_mul_pd(mv, c1)), denom);
    _mm256_storeu_pd(&params[i],
                     _mm256_sub_pd(_mm256_loadu_pd(&params[i]), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] * c1s) / (std::sqrt(v[i] * c2s) + eps);
  }
}

}  // namespace fr3e::kernels::avx2
