#include "bnkf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "kernels_normal_common.hpp"

namespace bnkf::kernels::avx2 {

// This translation unit is compiled with -mavx2 -mfma; callers must gate on
// CPU support before taking these entry points.

static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double out = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

void matvec(const double* W, std::size_t rows, std::size_t cols,
            const double* x, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = W + r * cols;
    double acc = dot(row, x, cols);
    y[r] = bias ? acc + bias[r] : acc;
  }
}

void matvec_t(const double* W, std::size_t rows, std::size_t cols,
              const double* g, double* out) {
  std::size_t c = 0;
  for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(out + c, _mm256_setzero_pd());
  for (; c < cols; ++c) out[c] = 0.0;

  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = W + r * cols;
    const __m256d gr = _mm256_set1_pd(g[r]);
    std::size_t i = 0;
    for (; i + 4 <= cols; i += 4) {
      __m256d acc = _mm256_loadu_pd(out + i);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + i), gr, acc);
      _mm256_storeu_pd(out + i, acc);
    }
    for (; i < cols; ++i) out[i] += row[i] * g[r];
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), va, acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy_mul(std::size_t n, double a, const double* x, const double* y,
              double* out) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    __m256d acc = _mm256_loadu_pd(out + i);
    acc = _mm256_fmadd_pd(prod, _mm256_loadu_pd(y + i), acc);
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) out[i] += a * x[i] * y[i];
}

void madd(std::size_t n, const double* mu, const double* sigma,
          const double* eps, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_fmadd_pd(_mm256_loadu_pd(sigma + i),
                                _mm256_loadu_pd(eps + i),
                                _mm256_loadu_pd(mu + i));
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) out[i] = mu[i] + sigma[i] * eps[i];
}

void normal_from_bits(const std::uint64_t* bits, double* out, std::size_t n) {
  using namespace detail;
  // Central-branch polynomials on 4 lanes; tail lanes are recomputed with
  // the shared scalar routine. No FMA here so results match the scalar
  // kernel bit-for-bit.
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d scale = _mm256_set1_pd(0x1p-52);
  const __m256d exp52 = _mm256_set1_pd(4503599627370496.0);  // 2^52
  const __m256i mant = _mm256_set1_epi64x(0x4330000000000000ll);
  const __m256d plow = _mm256_set1_pd(kPLow);
  const __m256d phigh = _mm256_set1_pd(kPHigh);
  const __m256d one = _mm256_set1_pd(1.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i raw = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + i));
    __m256i hi52 = _mm256_srli_epi64(raw, 12);
    // u64 -> double for values < 2^52: splice into the mantissa of 2^52.
    __m256d asd = _mm256_sub_pd(
        _mm256_castsi256_pd(_mm256_or_si256(hi52, mant)), exp52);
    __m256d p = _mm256_mul_pd(_mm256_add_pd(asd, half), scale);

    __m256d q = _mm256_sub_pd(p, half);
    __m256d r = _mm256_mul_pd(q, q);

    __m256d num = _mm256_set1_pd(kA[0]);
    for (int k = 1; k < 6; ++k)
      num = _mm256_add_pd(_mm256_mul_pd(num, r), _mm256_set1_pd(kA[k]));
    num = _mm256_mul_pd(num, q);
    __m256d den = _mm256_set1_pd(kB[0]);
    for (int k = 1; k < 5; ++k)
      den = _mm256_add_pd(_mm256_mul_pd(den, r), _mm256_set1_pd(kB[k]));
    den = _mm256_add_pd(_mm256_mul_pd(den, r), one);
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, den));

    __m256d is_tail = _mm256_or_pd(_mm256_cmp_pd(p, plow, _CMP_LT_OQ),
                                   _mm256_cmp_pd(p, phigh, _CMP_GT_OQ));
    int mask = _mm256_movemask_pd(is_tail);
    while (mask) {
      const int lane = __builtin_ctz(mask);
      mask &= mask - 1;
      out[i + lane] = inv_norm_tail(bits_to_uniform(bits[i + lane]));
    }
  }
  for (; i < n; ++i) {
    const double p = bits_to_uniform(bits[i]);
    out[i] = (p < kPLow || p > kPHigh) ? inv_norm_tail(p) : inv_norm_central(p);
  }
}

}  // namespace bnkf::kernels::avx2

#endif  // x86_64
