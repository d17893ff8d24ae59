#include <cmath>

#include "cecmmr/kernels.hpp"

namespace cecmmr::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_scalar(const AdamCoefficients& c, const double* grad, double* value, double* m, double* v,
                 std::size_t n) noexcept {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    value[i] -= (c.learning_rate * m_hat) / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace cecmmr::kernels::detail
