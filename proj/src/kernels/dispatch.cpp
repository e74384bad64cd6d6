#include <atomic>
#include <cstdlib>
#include <string>

#include "mara/errors.hpp"
#include "mara/kernels.hpp"

namespace mara::kernels {

#if !defined(MARA_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(MARA_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &scalar_table();
    case Backend::avx2:
      return cpu_has_avx2() ? avx2_table() : nullptr;
    case Backend::neon:
      return neon_table();
  }
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("MARA_KERNELS")) {
    std::string_view want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && table_for(Backend::avx2)) return table_for(Backend::avx2);
    if (want == "neon" && table_for(Backend::neon)) return table_for(Backend::neon);
  }
  if (auto* t = table_for(Backend::avx2)) return t;
  if (auto* t = table_for(Backend::neon)) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

bool backend_available(Backend b) { return table_for(b) != nullptr; }

void set_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (!t) throw InvalidArgument("kernel backend '" + std::string(backend_name(b)) + "' is not available");
  current().store(t);
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "neon") return Backend::neon;
  throw InvalidArgument("unknown kernel backend '" + std::string(name) + "'");
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
    if (backend_available(b)) out.push_back(b);
  return out;
}

}  // namespace mara::kernels
