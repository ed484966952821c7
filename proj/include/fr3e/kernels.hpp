#pragma once
// Numeric inner-loop kernels. Every kernel has a scalar reference
// implementation and (on x86-64) an AVX2 variant; the active backend is
// picked at runtime from CPU capabilities and can be overridden for tests.

#include <cstdint>
#include <span>

namespace fr3e::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
// Throws std::invalid_argument if the requested backend is not available.
void set_backend(Backend b);
const char* backend_name(Backend b);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double reduce_sum(std::span<const double> x);
double reduce_max(std::span<const double> x);
// out[i] = exp(x[i] - shift); returns the sum of out. shift is normally
// max(x) so every argument is <= 0 and the sum is >= 1.
double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out);
// p[i] = e[i] / sum
void normalize(std::span<const double> e, double sum, std::span<double> p);
// -sum_i p[i] * ln p[i], with the 0 * ln 0 = 0 convention.
double entropy(std::span<const double> p);
// out[i] = max(x[i], 0)
void relu(std::span<const double> x, std::span<double> out);
void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr);
// Adam with bias correction; step is the 1-based update count.
void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps);

namespace scalar {
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double reduce_sum(std::span<const double> x);
double reduce_max(std::span<const double> x);
double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out);
void normalize(std::span<const double> e, double sum, std::span<double> p);
double entropy(std::span<const double> p);
void relu(std::span<const double> x, std::span<double> out);
void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr);
void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps);
}  // namespace scalar

#ifdef FR3E_HAVE_AVX2
namespace avx2 {
void axpy(double a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double reduce_sum(std::span<const double> x);
double reduce_max(std::span<const double> x);
double exp_shift_sum(std::span<const double> x, double shift,
                     std::span<double> out);
void normalize(std::span<const double> e, double sum, std::span<double> p);
double entropy(std::span<const double> p);
void relu(std::span<const double> x, std::span<double> out);
void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr);
void adam_step(std::span<double> params, std::span<const double> grad,
               std::span<double> m, std::span<double> v, std::int64_t step,
               double lr, double beta1, double beta2, double eps);
// Vectorized exp/log used by the kernels above, exposed for accuracy tests.
double exp_ref(double x);
double log_ref(double x);
}  // namespace avx2
#endif

}  // namespace fr3e::kernels
