// Runtime backend selection. The scalar path is always available; AVX2 is
// picked at startup when both the binary was built with it and the CPU
// reports AVX2+FMA. set_backend() lets tests pin a specific variant.

#include "fr3e/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace fr3e::kernels {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend pick_default() {
#ifdef FR3E_HAVE_AVX2
  if (cpu_has_avx2_fma()) return Backend::avx2;
#endif
  return Backend::scalar;
}

std::atomic<Backend> g_backend{pick_default()};

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#ifdef FR3E_HAVE_AVX2
      return cpu_has_avx2_fma();
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("kernel backend not available: " +
                                std::string(backend_name(b)));
  }
  g_backend.store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "?";
}

#ifdef FR3E_HAVE_AVX2
#define FR3E_DISPATCH(call)                                      \
  if (g_backend.load(std::memory_order_relaxed) == Backend::avx2) \
    return avx2::call;                                            \
  return scalar::call
#else
#define FR3E_DISPATCH(call) return scalar::call
#endif

void axpy(double a, std::span<const double> x, std::span<double> y) {
  FR3E_DISPATCH(axpy(a, x, y));
}

double dot(std::span<const double> a, std::span<const double> b) {
  FR3E_DISPATCH(dot(a, b));
}

double reduce_sum(std::span<const double> x) { FR3E_DISPATCH(reduce_sum(x)); }

double reduce_max(std::span<const double> x) { FR3E_DISPATCH(reduce_max(x)); }

double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out) {
  FR3E_DISPATCH(exp_shift_sum(x, shift, out));
}

void normalize(std::span<const double> e, double sum, std::span<double> p) {
  FR3E_DISPATCH(normalize(e, sum, p));
}

double entropy(std::span<const double> p) { FR3E_DISPATCH(entropy(p)); }

void relu(std::span<const double> x, std::span<double> out) {
  FR3E_DISPATCH(relu(x, out));
}

void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr) {
  FR3E_DISPATCH(sgd_step(params, grad, lr));
}

void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps) {
  FR3E_DISPATCH(adam_step(params, grad, m, v, step, lr, beta1, beta2, eps));
}

#undef FR3E_DISPATCH

}  // namespace fr3e::kernels
