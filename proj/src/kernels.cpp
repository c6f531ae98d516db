#include "bnkf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace bnkf::kernels {

namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool env_forces_scalar() {
  const char* v = std::getenv("BNKF_KERNELS");
  return v && std::strcmp(v, "scalar") == 0;
}

const char* g_path = "scalar";

void bind_scalar() {
  matvec = scalar::matvec;
  matvec_t = scalar::matvec_t;
  axpy = scalar::axpy;
  madd = scalar::madd;
  axpy_mul = scalar::axpy_mul;
  dot = scalar::dot;
  normal_from_bits = scalar::normal_from_bits;
  g_path = "scalar";
}

void bind_auto() {
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2_fma() && !env_forces_scalar()) {
    matvec = avx2::matvec;
    matvec_t = avx2::matvec_t;
    axpy = avx2::axpy;
    madd = avx2::madd;
    axpy_mul = avx2::axpy_mul;
    dot = avx2::dot;
    normal_from_bits = avx2::normal_from_bits;
    g_path = "avx2";
    return;
  }
#endif
  bind_scalar();
}

struct Init {
  Init() { bind_auto(); }
};

}  // namespace

void (*matvec)(const double*, std::size_t, std::size_t, const double*,
               const double*, double*) = scalar::matvec;
void (*matvec_t)(const double*, std::size_t, std::size_t, const double*,
                 double*) = scalar::matvec_t;
void (*axpy)(std::size_t, double, const double*, double*) = scalar::axpy;
void (*madd)(std::size_t, const double*, const double*, const double*,
             double*) = scalar::madd;
void (*axpy_mul)(std::size_t, double, const double*, const double*,
                 double*) = scalar::axpy_mul;
double (*dot)(const double*, const double*, std::size_t) = scalar::dot;
void (*normal_from_bits)(const std::uint64_t*, double*, std::size_t) =
    scalar::normal_from_bits;

namespace {
Init g_init;
}

const char* active_path() { return g_path; }

void force_scalar(bool on) {
  if (on)
    bind_scalar();
  else
    bind_auto();
}

}  // namespace bnkf::kernels
