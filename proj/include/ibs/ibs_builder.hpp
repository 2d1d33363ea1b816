#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "ibs/linear_operator.hpp"
#include "json.hpp"

namespace ibs {

enum class IbsVariant { BS, W_IBS, B_IBS, BW_IBS };
enum class TransformBase { FFT, FWHT };
enum class TransformDirection { Kernel, KernelAdjoint };

std::string to_string(IbsVariant v);
std::string to_string(TransformBase b);
std::string to_string(TransformDirection d);
IbsVariant parse_variant(const std::string& s);
TransformBase parse_base(const std::string& s);
TransformDirection parse_direction(const std::string& s);

bool uses_block_interleaving(IbsVariant v);
bool uses_whole_interleaving(IbsVariant v);

/// Recipe for one interleaved block-sparse transform.
///
/// The signal of length n is cut into L = n / n_s segments, each transformed
/// by an n_s-point kernel. Each block keeps m_s = m / L rows; with block
/// interleaving the kept rows are the ones a seeded permutation moves to the
/// top, otherwise the first m_s. With whole interleaving a second seeded
/// permutation of size m shuffles the concatenated outputs.
///
/// Block l uses permutation seed block_seed_base + l; the whole interleaver
/// uses whole_seed.
struct IbsSpec {
  std::size_t n = 0;
  std::size_t n_s = 0;
  std::size_t m = 0;
  IbsVariant variant = IbsVariant::BW_IBS;
  TransformBase base = TransformBase::FFT;
  TransformDirection direction = TransformDirection::Kernel;
  std::uint64_t block_seed_base = 0;
  std::uint64_t whole_seed = 0;

  std::size_t blocks() const { return n_s == 0 ? 0 : n / n_s; }
  std::size_t rows_per_block() const { return blocks() == 0 ? 0 : m / blocks(); }
  double compression() const { return static_cast<double>(m) / static_cast<double>(n); }

  /// Throws ConfigError on any broken invariant.
  void validate() const;
  bool operator==(const IbsSpec&) const = default;
};

void to_json(nlohmann::ordered_json& j, const IbsSpec& spec);
void from_json(const nlohmann::ordered_json& j, IbsSpec& spec);

/// Row-orthonormal m x n operator for `spec`.
LinearOperator build_ibs_transform(const IbsSpec& spec);

/// Block index of every output row of build_ibs_transform(spec). Output row i
/// only depends on input segment [b n_s, (b + 1) n_s) with b = result[i].
std::vector<std::uint32_t> ibs_row_blocks(const IbsSpec& spec);

/// Kernel (or adjoint) of size n with a seeded row permutation, first m rows:
/// [P T_n]_{1:m}. This is the non-block-sparse reference transform.
LinearOperator build_full_transform(std::size_t n, std::size_t m, TransformBase base, TransformDirection direction,
                                    std::uint64_t seed);

/// Unitary n-point kernel of the given base and direction.
LinearOperator kernel_operator(std::size_t n, TransformBase base, TransformDirection direction);

struct Ofdm {};
struct Otfs {
  std::size_t k = 0;  // delay bins
  std::size_t j = 0;  // Doppler bins; n = k * j
};
struct Afdm {
  double c1 = 0.0;
  double c2 = 0.0;
};
struct Ifdm {
  std::uint64_t seed = 0;
};
using MulticarrierKind = std::variant<Ofdm, Otfs, Afdm, Ifdm>;

/// n x n unitary modulation matrix:
///   OFDM  F^H
///   OTFS  F_J^H (x) I_K
///   AFDM  L_{c1}^H F^H L_{c2}^H, L_c = diag(exp(-j 2 pi c i^2))
///   IFDM  P F^H with a seeded random permutation P
LinearOperator build_multicarrier(const MulticarrierKind& kind, std::size_t n);

struct RelativeComplexity {
  double theta_ibs = 0.0;  // log(n_s) / log(n)
  double overall = 0.0;    // per-iteration estimator cost ratio
};

/// Relative complexity of an n_s-block transform against the full n-point
/// transform. `overall` compares the per-iteration estimator cost
/// P n + n + 2 n log2(.) with the transform term at n_s and at n.
RelativeComplexity relative_complexity(std::size_t n, std::size_t n_s, double p = 8.0);

}  // namespace ibs
