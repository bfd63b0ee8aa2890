#include <atomic>
#include <cstdlib>
#include <string>

#include "echostrain/errors.hpp"
#include "echostrain/kernels/kernels.hpp"

namespace echostrain::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable& best_supported() {
#if defined(ECHOSTRAIN_HAVE_AVX2)
  if (avx2_supported()) {
    return avx2_table();
  }
#endif
  return scalar_table();
}

}  // namespace

void select(std::string_view mode) {
  if (mode == "auto") {
    const char* env = std::getenv("ECHOSTRAIN_KERNELS");
    if (env != nullptr && *env != '\0' && std::string_view(env) != "auto") {
      select(env);
      return;
    }
    g_active.store(&best_supported(), std::memory_order_release);
    return;
  }
  if (mode == "scalar") {
    g_active.store(&scalar_table(), std::memory_order_release);
    return;
  }
  if (mode == "avx2") {
#if defined(ECHOSTRAIN_HAVE_AVX2)
    if (avx2_supported()) {
      g_active.store(&avx2_table(), std::memory_order_release);
      return;
    }
#endif
    throw ValidationError("kernel variant 'avx2' is not supported on this machine");
  }
  throw ValidationError("unknown kernel variant '" + std::string(mode) +
                        "' (expected auto, scalar, or avx2)");
}

const KernelTable& active() {
  const KernelTable* table = g_active.load(std::memory_order_acquire);
  if (table == nullptr) {
    select("auto");
    table = g_active.load(std::memory_order_acquire);
  }
  return *table;
}

std::string active_name() { return active().name; }

}  // namespace echostrain::kernels
