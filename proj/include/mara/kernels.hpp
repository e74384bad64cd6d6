#pragma once

// Dense double-precision inner loops with a portable scalar reference and
// SIMD variants (AVX2+FMA on x86-64, NEON on aarch64). The variant is picked
// once at runtime from CPU features; MARA_KERNELS=scalar in the environment
// or set_backend() overrides the choice.
//
// All matrices are row-major and dense. The gemm routines accumulate into C.

#include <cstddef>
#include <string_view>
#include <vector>

namespace mara::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// C(n x p) += A(n x m) * B(m x p)
  void (*gemm_nn)(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c);
  /// C(n x p) += A(n x m) * B(p x m)^T
  void (*gemm_nt)(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c);
  /// C(m x p) += A(n x m)^T * B(n x p)
  void (*gemm_tn)(std::size_t n, std::size_t m, std::size_t p, const double* a, const double* b,
                  double* c);
  /// out_k = || d - r * g_k || with grid points given as separate x/y/z arrays.
  void (*sphere_distances)(const double d[3], double r, const double* gx, const double* gy,
                           const double* gz, double* out, std::size_t k);
};

const KernelTable& scalar_table();
/// nullptr when the variant was not compiled in.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool backend_available(Backend b);
/// Throws InvalidArgument when the backend is unavailable on this machine.
void set_backend(Backend b);
const KernelTable& active();

std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view name);
std::vector<Backend> available_backends();

}  // namespace mara::kernels
