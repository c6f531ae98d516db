#include "bnkf/rng.hpp"

#include "bnkf/kernels.hpp"

namespace bnkf::rng {

void NormalStream::fill(double* out, std::size_t n) {
  if (bits_.size() < n) bits_.resize(n);
  for (std::size_t i = 0; i < n; ++i) bits_[i] = eng_();
  kernels::normal_from_bits(bits_.data(), out, n);
}

}  // namespace bnkf::rng
