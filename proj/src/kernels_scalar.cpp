#include "bnkf/kernels.hpp"

#include "kernels_normal_common.hpp"

namespace bnkf::kernels::scalar {

void matvec(const double* W, std::size_t rows, std::size_t cols,
            const double* x, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = W + r * cols;
    double acc = bias ? bias[r] : 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void matvec_t(const double* W, std::size_t rows, std::size_t cols,
              const double* g, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = W + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * gr;
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void madd(std::size_t n, const double* mu, const double* sigma,
          const double* eps, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = mu[i] + sigma[i] * eps[i];
}

void axpy_mul(std::size_t n, double a, const double* x, const double* y,
              double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a * x[i] * y[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void normal_from_bits(const std::uint64_t* bits, double* out, std::size_t n) {
  using namespace detail;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = bits_to_uniform(bits[i]);
    out[i] = (p < kPLow || p > kPHigh) ? inv_norm_tail(p) : inv_norm_central(p);
  }
}

}  // namespace bnkf::kernels::scalar
