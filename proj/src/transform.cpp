#include "ibs/transform.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "ibs/errors.hpp"

namespace ibs {

namespace {

thread_local std::uint64_t t_butterflies = 0;

void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw SizeError(std::string(what) + ": length " + std::to_string(n) + " is not a power of two");
  }
}

// Twiddles e^{-j 2 pi k / n}, k < n/2, shared by all transforms of size n.
std::shared_ptr<const CVec> twiddles(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::shared_ptr<const CVec>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<CVec>(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    (*table)[k] = {std::cos(angle), std::sin(angle)};
  }
  cache.emplace(n, table);
  return table;
}

void bit_reverse(std::span<cplx> v) {
  const std::size_t n = v.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(v[i], v[j]);
  }
}

void radix2(std::span<cplx> v, bool inverse) {
  const std::size_t n = v.size();
  if (n <= 1) return;
  const auto table = twiddles(n);
  bit_reverse(v);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx w = (*table)[k * stride];
        if (inverse) w = std::conj(w);
        const cplx a = v[start + k];
        const cplx b = v[start + k + half] * w;
        v[start + k] = a + b;
        v[start + k + half] = a - b;
      }
    }
    t_butterflies += n / 2;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& z : v) z *= scale;
}

}  // namespace

std::size_t log2_exact(std::size_t n) {
  require_power_of_two(n, "log2_exact");
  std::size_t k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

void fft_inplace(std::span<cplx> v) {
  require_power_of_two(v.size(), "fft");
  radix2(v, false);
}

void ifft_inplace(std::span<cplx> v) {
  require_power_of_two(v.size(), "ifft");
  radix2(v, true);
}

void fwht_inplace(std::span<cplx> v) {
  const std::size_t n = v.size();
  require_power_of_two(n, "fwht");
  if (n == 1) return;
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t start = 0; start < n; start += 2 * len) {
      for (std::size_t k = start; k < start + len; ++k) {
        const cplx a = v[k];
        const cplx b = v[k + len];
        v[k] = a + b;
        v[k + len] = a - b;
      }
    }
    t_butterflies += n / 2;
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& z : v) z *= scale;
}

CVec fft_forward(std::span<const cplx> v) {
  CVec out(v.begin(), v.end());
  fft_inplace(out);
  return out;
}

CVec fft_inverse(std::span<const cplx> v) {
  CVec out(v.begin(), v.end());
  ifft_inplace(out);
  return out;
}

CVec fwht_forward(std::span<const cplx> v) {
  CVec out(v.begin(), v.end());
  fwht_inplace(out);
  return out;
}

std::uint64_t butterfly_count() { return t_butterflies; }
void reset_butterfly_count() { t_butterflies = 0; }

}  // namespace ibs
