#pragma once

#include <cmath>
#include <cstdint>

// Inverse normal CDF (Acklam's rational approximation, |rel err| < 1.2e-9).
// Shared by the scalar and AVX2 normal_from_bits kernels; the AVX2 path
// vectorizes the central branch and falls back to this function for the
// ~4.9% of draws that land in the tails.

namespace bnkf::kernels::detail {

inline constexpr double kPLow = 0.02425;
inline constexpr double kPHigh = 1.0 - kPLow;

inline constexpr double kA[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
inline constexpr double kB[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
inline constexpr double kC[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
inline constexpr double kD[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};

inline double inv_norm_tail(double p) {
  // p outside [kPLow, kPHigh]
  if (p < kPLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q +
            kC[5]) /
           ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q +
           kC[5]) /
         ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
}

inline double inv_norm_central(double p) {
  const double q = p - 0.5;
  const double r = q * q;
  return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r +
          kA[5]) *
         q /
         (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r +
          1.0);
}

// 52-bit resolution so the word fits the mantissa-splice conversion used by
// the vector path.
inline double bits_to_uniform(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1p-52;
}

}  // namespace bnkf::kernels::detail
