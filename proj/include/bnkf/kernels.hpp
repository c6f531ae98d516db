#pragma once

#include <cstddef>
#include <cstdint>

namespace bnkf::kernels {

// Dense double-precision primitives behind the network math. Each operation
// has a scalar reference implementation and an AVX2+FMA variant; the public
// entry points dispatch once at startup based on CPU support and can be
// forced onto the reference path (tests, odd hardware) via force_scalar()
// or the BNKF_KERNELS=scalar environment variable.
//
// On a given machine the selected path is fixed for the whole process, so
// seeded runs stay bit-reproducible.

// y = W x + bias (bias may be null). W is row-major rows x cols.
extern void (*matvec)(const double* W, std::size_t rows, std::size_t cols,
                      const double* x, const double* bias, double* y);

// out = W^T g. W is row-major rows x cols, g has rows entries,
// out has cols entries and is overwritten.
extern void (*matvec_t)(const double* W, std::size_t rows, std::size_t cols,
                        const double* g, double* out);

// y += a * x
extern void (*axpy)(std::size_t n, double a, const double* x, double* y);

// out = mu + sigma .* eps  (reparameterized parameter draw)
extern void (*madd)(std::size_t n, const double* mu, const double* sigma,
                    const double* eps, double* out);

// out += a * x .* y  (fused elementwise product accumulate)
extern void (*axpy_mul)(std::size_t n, double a, const double* x,
                        const double* y, double* out);

// dot product
extern double (*dot)(const double* a, const double* b, std::size_t n);

// Maps raw 64-bit words to standard normal draws through the inverse CDF
// (each word becomes the uniform (bits>>11 + 0.5) * 2^-53). Scalar and
// AVX2 variants are bit-identical by construction: the polynomial is
// evaluated without FMA contraction in both.
extern void (*normal_from_bits)(const std::uint64_t* bits, double* out,
                                std::size_t n);

namespace scalar {
void matvec(const double* W, std::size_t rows, std::size_t cols,
            const double* x, const double* bias, double* y);
void matvec_t(const double* W, std::size_t rows, std::size_t cols,
              const double* g, double* out);
void axpy(std::size_t n, double a, const double* x, double* y);
void madd(std::size_t n, const double* mu, const double* sigma,
          const double* eps, double* out);
void axpy_mul(std::size_t n, double a, const double* x, const double* y,
              double* out);
double dot(const double* a, const double* b, std::size_t n);
void normal_from_bits(const std::uint64_t* bits, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void matvec(const double* W, std::size_t rows, std::size_t cols,
            const double* x, const double* bias, double* y);
void matvec_t(const double* W, std::size_t rows, std::size_t cols,
              const double* g, double* out);
void axpy(std::size_t n, double a, const double* x, double* y);
void madd(std::size_t n, const double* mu, const double* sigma,
          const double* eps, double* out);
void axpy_mul(std::size_t n, double a, const double* x, const double* y,
              double* out);
double dot(const double* a, const double* b, std::size_t n);
void normal_from_bits(const std::uint64_t* bits, double* out, std::size_t n);
}  // namespace avx2
#endif

// Selected path: "scalar" or "avx2".
const char* active_path();

// Pin all entry points to the scalar reference (or back to auto-detect).
void force_scalar(bool on);

}  // namespace bnkf::kernels
