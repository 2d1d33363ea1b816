#pragma once

#include <cstdint>
#include <span>

#include "ibs/types.hpp"

namespace ibs {

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
std::size_t log2_exact(std::size_t n);

// Unitary radix-2 kernels. All of them throw SizeError for lengths that are
// not a power of two. Scale is 1/sqrt(n) in both directions.
void fft_inplace(std::span<cplx> v);
void ifft_inplace(std::span<cplx> v);
// Natural (Hadamard) ordering: H_{2n} = [[H_n, H_n], [H_n, -H_n]] / sqrt(2).
void fwht_inplace(std::span<cplx> v);

CVec fft_forward(std::span<const cplx> v);
CVec fft_inverse(std::span<const cplx> v);
CVec fwht_forward(std::span<const cplx> v);

// Butterfly instrumentation. Every kernel adds n/2 per stage to a
// thread-local counter, so a full n-point transform adds (n/2) log2 n.
std::uint64_t butterfly_count();
void reset_butterfly_count();

}  // namespace ibs
