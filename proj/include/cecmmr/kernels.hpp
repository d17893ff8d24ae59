#pragma once

// Data-parallel inner loops used by the dense layers and the optimizer.
//
// Every kernel has a scalar reference implementation. SIMD variants (AVX2 on
// x86-64, NEON on AArch64) are compiled in separate translation units and
// picked at runtime. Elementwise kernels (axpy, adam) perform the same IEEE
// operations in the same order as the scalar path and are bit-identical to it;
// dot() reassociates the sum and agrees to rounding.
//
// The environment variable CECMMR_KERNELS=scalar|avx2|neon overrides the
// automatic choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace cecmmr::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend) noexcept;

/// Bias-corrected Adam coefficients for one optimizer step.
struct AdamCoefficients {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double bias_correction1 = 1.0;  // 1 - beta1^t
  double bias_correction2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*adam)(const AdamCoefficients& c, const double* grad, double* value, double* m, double* v,
               std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// Null when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

/// Best backend available on this machine, honoring CECMMR_KERNELS.
Backend detect_backend() noexcept;
bool backend_available(Backend backend) noexcept;

/// Table in use by the convenience wrappers below.
const KernelTable& active() noexcept;
/// Switches the active table. Throws ConfigError if unavailable.
void select(Backend backend);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void adam(const AdamCoefficients& c, std::span<const double> grad, std::span<double> value,
                 std::span<double> m, std::span<double> v) noexcept {
  active().adam(c, grad.data(), value.data(), m.data(), v.data(), grad.size());
}

/// RAII guard that switches the active backend and restores the previous one.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n) noexcept;
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) noexcept;
void adam_scalar(const AdamCoefficients& c, const double* grad, double* value, double* m,
                 double* v, std::size_t n) noexcept;

#if defined(CECMMR_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n) noexcept;
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) noexcept;
void adam_avx2(const AdamCoefficients& c, const double* grad, double* value, double* m, double* v,
               std::size_t n) noexcept;
#endif

#if defined(CECMMR_HAVE_NEON)
double dot_neon(const double* a, const double* b, std::size_t n) noexcept;
void axpy_neon(double alpha, const double* x, double* y, std::size_t n) noexcept;
void adam_neon(const AdamCoefficients& c, const double* grad, double* value, double* m, double* v,
               std::size_t n) noexcept;
#endif
}  // namespace detail

}  // namespace cecmmr::kernels
