#include "ibs/ibs_builder.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "ibs/errors.hpp"
#include "ibs/transform.hpp"

namespace ibs {

std::string to_string(IbsVariant v) {
  switch (v) {
    case IbsVariant::BS: return "BS";
    case IbsVariant::W_IBS: return "W_IBS";
    case IbsVariant::B_IBS: return "B_IBS";
    case IbsVariant::BW_IBS: return "BW_IBS";
  }
  return "?";
}

std::string to_string(TransformBase b) { return b == TransformBase::FFT ? "FFT" : "FWHT"; }

std::string to_string(TransformDirection d) {
  return d == TransformDirection::Kernel ? "kernel" : "kernel-adjoint";
}

IbsVariant parse_variant(const std::string& s) {
  if (s == "BS") return IbsVariant::BS;
  if (s == "W_IBS") return IbsVariant::W_IBS;
  if (s == "B_IBS") return IbsVariant::B_IBS;
  if (s == "BW_IBS") return IbsVariant::BW_IBS;
  throw ConfigError("unknown IBS variant '" + s + "'");
}

TransformBase parse_base(const std::string& s) {
  if (s == "FFT") return TransformBase::FFT;
  if (s == "FWHT") return TransformBase::FWHT;
  throw ConfigError("unknown transform base '" + s + "'");
}

TransformDirection parse_direction(const std::string& s) {
  if (s == "kernel") return TransformDirection::Kernel;
  if (s == "kernel-adjoint") return TransformDirection::KernelAdjoint;
  throw ConfigError("unknown transform direction '" + s + "'");
}

bool uses_block_interleaving(IbsVariant v) { return v == IbsVariant::B_IBS || v == IbsVariant::BW_IBS; }
bool uses_whole_interleaving(IbsVariant v) { return v == IbsVariant::W_IBS || v == IbsVariant::BW_IBS; }

void IbsSpec::validate() const {
  std::ostringstream err;
  if (n == 0 || n_s == 0 || m == 0) {
    err << "n, n_s and m must be positive";
  } else if (!is_power_of_two(n_s)) {
    err << "n_s=" << n_s << " is not a power of two";
  } else if (n % n_s != 0) {
    err << "n=" << n << " is not a multiple of n_s=" << n_s;
  } else if (m > n) {
    err << "m=" << m << " exceeds n=" << n;
  } else if (m % blocks() != 0) {
    err << "m=" << m << " is not a multiple of L=" << blocks() << " (equal rows per block required)";
  } else if (rows_per_block() > n_s) {
    err << "m_s=" << rows_per_block() << " exceeds n_s=" << n_s;
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw ConfigError("IbsSpec: " + msg);
}

void to_json(nlohmann::ordered_json& j, const IbsSpec& spec) {
  j = nlohmann::ordered_json{{"n", spec.n},
                             {"n_s", spec.n_s},
                             {"m", spec.m},
                             {"variant", to_string(spec.variant)},
                             {"base", to_string(spec.base)},
                             {"direction", to_string(spec.direction)},
                             {"block_seed_base", spec.block_seed_base},
                             {"whole_seed", spec.whole_seed}};
}

void from_json(const nlohmann::ordered_json& j, IbsSpec& spec) {
  static const char* keys[] = {"n", "n_s", "m", "variant", "base", "direction", "block_seed_base", "whole_seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw ConfigError("IbsSpec: unknown key '" + it.key() + "'");
    }
  }
  for (const char* k : keys) {
    if (!j.contains(k)) throw ConfigError(std::string("IbsSpec: missing key '") + k + "'");
  }
  spec.n = j.at("n").get<std::size_t>();
  spec.n_s = j.at("n_s").get<std::size_t>();
  spec.m = j.at("m").get<std::size_t>();
  spec.variant = parse_variant(j.at("variant").get<std::string>());
  spec.base = parse_base(j.at("base").get<std::string>());
  spec.direction = parse_direction(j.at("direction").get<std::string>());
  spec.block_seed_base = j.at("block_seed_base").get<std::uint64_t>();
  spec.whole_seed = j.at("whole_seed").get<std::uint64_t>();
}

LinearOperator kernel_operator(std::size_t n, TransformBase base, TransformDirection direction) {
  if (base == TransformBase::FWHT) return fwht_operator(n);
  return direction == TransformDirection::Kernel ? fft_operator(n) : ifft_operator(n);
}

LinearOperator build_ibs_transform(const IbsSpec& spec) {
  spec.validate();
  const std::size_t num_blocks = spec.blocks();
  const std::size_t m_s = spec.rows_per_block();
  const LinearOperator kernel = kernel_operator(spec.n_s, spec.base, spec.direction);

  std::vector<LinearOperator> blocks;
  blocks.reserve(num_blocks);
  for (std::size_t l = 0; l < num_blocks; ++l) {
    std::vector<std::size_t> rows(m_s);
    if (uses_block_interleaving(spec.variant)) {
      // [P_l T]_{1:m_s}: row i of P_l T is row mapping[i] of T.
      const Permutation local = make_permutation(spec.n_s, spec.block_seed_base + l);
      for (std::size_t i = 0; i < m_s; ++i) rows[i] = local[i];
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    blocks.push_back(row_gather(kernel, std::move(rows)));
  }
  LinearOperator body = block_diag_union(std::move(blocks));
  if (uses_whole_interleaving(spec.variant)) {
    body = compose(permutation_operator(make_permutation(spec.m, spec.whole_seed)), body);
  }
  return body;
}

std::vector<std::uint32_t> ibs_row_blocks(const IbsSpec& spec) {
  spec.validate();
  const std::size_t m_s = spec.rows_per_block();
  std::vector<std::uint32_t> out(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i) out[i] = static_cast<std::uint32_t>(i / m_s);
  if (uses_whole_interleaving(spec.variant)) {
    const Permutation whole = make_permutation(spec.m, spec.whole_seed);
    for (std::size_t i = 0; i < spec.m; ++i) out[i] = static_cast<std::uint32_t>(whole[i] / m_s);
  }
  return out;
}

LinearOperator build_full_transform(std::size_t n, std::size_t m, TransformBase base, TransformDirection direction,
                                    std::uint64_t seed) {
  if (!is_power_of_two(n)) throw ConfigError("full transform size must be a power of two");
  if (m == 0 || m > n) throw ConfigError("full transform: m must lie in [1, n]");
  const Permutation perm = make_permutation(n, seed);
  std::vector<std::size_t> rows(perm.mapping().begin(), perm.mapping().begin() + static_cast<std::ptrdiff_t>(m));
  return row_gather(kernel_operator(n, base, direction), std::move(rows));
}

LinearOperator build_multicarrier(const MulticarrierKind& kind, std::size_t n) {
  if (!is_power_of_two(n)) throw ConfigError("multicarrier size must be a power of two");
  return std::visit(
      [n](const auto& k) -> LinearOperator {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Ofdm>) {
          return ifft_operator(n);
        } else if constexpr (std::is_same_v<K, Otfs>) {
          if (k.k * k.j != n) throw ConfigError("OTFS requires n = K * J");
          if (!is_power_of_two(k.j)) throw ConfigError("OTFS requires J to be a power of two");
          return kron_identity(ifft_operator(k.j), k.k);
        } else if constexpr (std::is_same_v<K, Afdm>) {
          auto chirp_h = [n](double c) {
            CVec d(n);
            for (std::size_t i = 0; i < n; ++i) {
              // Reduce c*i^2 mod 1 before scaling so large i keeps full precision.
              const double phase = std::fmod(c * static_cast<double>(i) * static_cast<double>(i), 1.0);
              d[i] = std::polar(1.0, 2.0 * kPi * phase);  // conj(exp(-j 2 pi c i^2))
            }
            return diagonal_operator(std::move(d));
          };
          return compose(chirp_h(k.c1), compose(ifft_operator(n), chirp_h(k.c2)));
        } else {
          return compose(permutation_operator(make_permutation(n, k.seed)), ifft_operator(n));
        }
      },
      kind);
}

RelativeComplexity relative_complexity(std::size_t n, std::size_t n_s, double p) {
  if (!is_power_of_two(n) || !is_power_of_two(n_s) || n_s > n || n < 2) {
    throw ConfigError("relative_complexity: n, n_s must be powers of two with 2 <= n and n_s <= n");
  }
  if (p < 0.0) throw ConfigError("relative_complexity: p must be non-negative");
  const auto log_n = static_cast<double>(log2_exact(n));
  const auto log_ns = static_cast<double>(log2_exact(n_s));
  return {log_ns / log_n, (p + 1.0 + 2.0 * log_ns) / (p + 1.0 + 2.0 * log_n)};
}

}  // namespace ibs
