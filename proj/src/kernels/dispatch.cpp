#include <atomic>
#include <cstdlib>
#include <string>

#include "cecmmr/errors.hpp"
#include "cecmmr/kernels.hpp"

namespace cecmmr::kernels {
namespace {

constexpr KernelTable kScalarTable{Backend::kScalar, detail::dot_scalar, detail::axpy_scalar,
                                   detail::adam_scalar};

#if defined(CECMMR_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Backend::kAvx2, detail::dot_avx2, detail::axpy_avx2,
                                 detail::adam_avx2};
#endif

#if defined(CECMMR_HAVE_NEON)
constexpr KernelTable kNeonTable{Backend::kNeon, detail::dot_neon, detail::axpy_neon,
                                 detail::adam_neon};
#endif

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
      return avx2_table();
    case Backend::kNeon:
      return neon_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{table_for(detect_backend())};
  return slot;
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() noexcept { return kScalarTable; }

const KernelTable* avx2_table() noexcept {
#if defined(CECMMR_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(CECMMR_HAVE_NEON)
  return &kNeonTable;
#else
  return nullptr;
#endif
}

bool backend_available(Backend backend) noexcept { return table_for(backend) != nullptr; }

Backend detect_backend() noexcept {
  if (const char* forced = std::getenv("CECMMR_KERNELS")) {
    const std::string name(forced);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (name == backend_name(b) && backend_available(b)) return b;
    }
  }
  if (backend_available(Backend::kAvx2)) return Backend::kAvx2;
  if (backend_available(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_relaxed); }

void select(Backend backend) {
  const KernelTable* table = table_for(backend);
  if (table == nullptr) {
    throw ConfigError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this machine");
  }
  active_slot().store(table, std::memory_order_relaxed);
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active().backend) { select(backend); }

ScopedBackend::~ScopedBackend() { select(previous_); }

}  // namespace cecmmr::kernels
