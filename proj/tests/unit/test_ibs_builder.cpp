#include "doctest.h"
#include "ibs/errors.hpp"
#include "ibs/ibs_builder.hpp"
#include "util.hpp"

using namespace ibs;
using namespace testutil;

namespace {

const IbsVariant kVariants[] = {IbsVariant::BS, IbsVariant::W_IBS, IbsVariant::B_IBS, IbsVariant::BW_IBS};

Eigen::MatrixXcd kernel_dense(std::size_t n, TransformBase base, TransformDirection dir) {
  const Eigen::MatrixXcd k = base == TransformBase::FFT ? dft_matrix(n) : hadamard_matrix(n);
  return dir == TransformDirection::Kernel ? k : Eigen::MatrixXcd(k.adjoint());
}

// Independent assembly: whole * blockdiag([P_l T]_{1:m_s}).
Eigen::MatrixXcd assemble(const IbsSpec& s) {
  const std::size_t blocks = s.n / s.n_s;
  const std::size_t ms = s.m / blocks;
  const Eigen::MatrixXcd t = kernel_dense(s.n_s, s.base, s.direction);
  const bool local = s.variant == IbsVariant::B_IBS || s.variant == IbsVariant::BW_IBS;
  const bool whole = s.variant == IbsVariant::W_IBS || s.variant == IbsVariant::BW_IBS;
  Eigen::MatrixXcd body = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(s.m), static_cast<Eigen::Index>(s.n));
  for (std::size_t l = 0; l < blocks; ++l) {
    Eigen::MatrixXcd pt = t;
    if (local) pt = permutation_matrix(make_permutation(s.n_s, s.block_seed_base + l).mapping()) * t;
    body.block(static_cast<Eigen::Index>(l * ms), static_cast<Eigen::Index>(l * s.n_s), static_cast<Eigen::Index>(ms),
               static_cast<Eigen::Index>(s.n_s)) = pt.topRows(static_cast<Eigen::Index>(ms));
  }
  if (whole) body = permutation_matrix(make_permutation(s.m, s.whole_seed).mapping()) * body;
  return body;
}

}  // namespace

TEST_CASE("BS equals block diagonal of truncated DFTs") {
  const IbsSpec spec{8, 4, 4, IbsVariant::BS, TransformBase::FFT, TransformDirection::Kernel, 1, 2};
  Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(4, 8);
  ref.block(0, 0, 2, 4) = dft_matrix(4).topRows(2);
  ref.block(2, 4, 2, 4) = dft_matrix(4).topRows(2);
  CHECK(dense_mismatch(build_ibs_transform(spec), ref) < 1e-15);
}

TEST_CASE("every variant matches independent dense assembly") {
  for (auto v : kVariants) {
    for (auto base : {TransformBase::FFT, TransformBase::FWHT}) {
      for (auto dir : {TransformDirection::Kernel, TransformDirection::KernelAdjoint}) {
        const IbsSpec spec{64, 8, 32, v, base, dir, 1000, 77};
        CAPTURE(to_string(v));
        CHECK(dense_mismatch(build_ibs_transform(spec), assemble(spec)) < 1e-14);
      }
    }
  }
}

TEST_CASE("row orthonormality for all variants and random seeds") {
  Xoshiro256 rng(11);
  for (auto v : kVariants) {
    for (auto base : {TransformBase::FFT, TransformBase::FWHT}) {
      for (int trial = 0; trial < 5; ++trial) {
        const IbsSpec spec{256, 32, 128, v, base, TransformDirection::Kernel, rng.next_u64(), rng.next_u64()};
        const Eigen::MatrixXcd x = materialize_dense(build_ibs_transform(spec));
        CHECK((x * x.adjoint() - Eigen::MatrixXcd::Identity(128, 128)).cwiseAbs().maxCoeff() < tol::kUnitary);
      }
    }
  }
}

TEST_CASE("square transforms are unitary") {
  Xoshiro256 rng(12);
  for (auto v : kVariants) {
    const IbsSpec spec{64, 16, 64, v, TransformBase::FFT, TransformDirection::KernelAdjoint, rng.next_u64(),
                       rng.next_u64()};
    const Eigen::MatrixXcd x = materialize_dense(build_ibs_transform(spec));
    CHECK((x * x.adjoint() - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff() < tol::kUnitary);
    CHECK((x.adjoint() * x - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff() < tol::kUnitary);
  }
}

TEST_CASE("variant degeneracies") {
  // With m = n every block permutation keeps all rows, so B_IBS equals BS
  // up to a row order; compare Gram matrices and the row sets through BS.
  const IbsSpec bs{32, 8, 16, IbsVariant::BS, TransformBase::FWHT, TransformDirection::Kernel, 3, 4};
  IbsSpec w = bs;
  w.variant = IbsVariant::W_IBS;
  // Whole interleaving only reorders rows: W_IBS = P * BS.
  const Eigen::MatrixXcd xw = materialize_dense(build_ibs_transform(w));
  const Eigen::MatrixXcd xb = materialize_dense(build_ibs_transform(bs));
  const Eigen::MatrixXcd p = permutation_matrix(make_permutation(16, 4).mapping());
  CHECK((xw - p * xb).cwiseAbs().maxCoeff() < 1e-15);

  // BW_IBS with one block of size one is the identity map, same as BS.
  const IbsSpec one{4, 1, 4, IbsVariant::BW_IBS, TransformBase::FFT, TransformDirection::Kernel, 9, 9};
  IbsSpec one_bs = one;
  one_bs.variant = IbsVariant::BS;
  const Eigen::MatrixXcd bw1 = materialize_dense(build_ibs_transform(one));
  const Eigen::MatrixXcd p4 = permutation_matrix(make_permutation(4, 9).mapping());
  CHECK((bw1 - p4 * materialize_dense(build_ibs_transform(one_bs))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single block collapses to the permuted full transform") {
  const IbsSpec spec{128, 128, 128, IbsVariant::BW_IBS, TransformBase::FFT, TransformDirection::Kernel, 21, 22};
  const LinearOperator direct = compose(permutation_operator(make_permutation(128, 22)),
                                        compose(permutation_operator(make_permutation(128, 21)), fft_operator(128)));
  Xoshiro256 rng(13);
  const CVec v = random_cvec(128, rng);
  CHECK(max_abs_diff(build_ibs_transform(spec).apply(v), direct.apply(v)) == 0.0);
}

TEST_CASE("spec validation") {
  IbsSpec bad{64, 12, 32, IbsVariant::BS, TransformBase::FFT, TransformDirection::Kernel, 0, 0};
  CHECK_THROWS_AS(build_ibs_transform(bad), ConfigError);
  bad.n_s = 8;
  bad.m = 30;  // not divisible by 8 blocks
  CHECK_THROWS_AS(build_ibs_transform(bad), ConfigError);
  bad.m = 128;  // m_s > n_s
  CHECK_THROWS_AS(build_ibs_transform(bad), ConfigError);
  bad.m = 0;
  CHECK_THROWS_AS(build_ibs_transform(bad), ConfigError);
  CHECK_THROWS_AS(parse_variant("XW_IBS"), ConfigError);
  CHECK(parse_variant("BW_IBS") == IbsVariant::BW_IBS);
  CHECK(parse_base("FWHT") == TransformBase::FWHT);
}

TEST_CASE("spec json round trip") {
  const IbsSpec spec{1024, 64, 512, IbsVariant::B_IBS, TransformBase::FWHT, TransformDirection::KernelAdjoint,
                     0xdeadbeefcafeULL, 17};
  nlohmann::ordered_json j = spec;
  const std::string text = j.dump();
  CHECK(text.find("\"n\"") < text.find("\"n_s\""));
  const IbsSpec back = nlohmann::ordered_json::parse(text).get<IbsSpec>();
  CHECK(back == spec);
}

TEST_CASE("row block labels follow the whole interleaver") {
  const IbsSpec spec{64, 8, 32, IbsVariant::BW_IBS, TransformBase::FFT, TransformDirection::Kernel, 5, 6};
  const auto labels = ibs_row_blocks(spec);
  const Eigen::MatrixXcd x = materialize_dense(build_ibs_transform(spec));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto b = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    const double inside = x.row(i).segment(b * 8, 8).norm();
    CHECK(std::abs(inside - 1.0) < 1e-12);
  }
}

TEST_CASE("multicarrier matrices") {
  const LinearOperator ofdm = build_multicarrier(Ofdm{}, 4);
  CHECK(max_abs_diff(ofdm.apply(CVec{2, 0, 0, 0}), CVec{1, 1, 1, 1}) < 1e-15);

  Xoshiro256 rng(14);
  const CVec v = random_cvec(64, rng);
  CHECK(max_abs_diff(build_multicarrier(Afdm{0.0, 0.0}, 64).apply(v), build_multicarrier(Ofdm{}, 64).apply(v)) < 1e-12);

  const Eigen::MatrixXcd f2h = dft_matrix(2).adjoint();
  Eigen::MatrixXcd kron(4, 4);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) kron.block(2 * i, 2 * j, 2, 2) = f2h(i, j) * Eigen::MatrixXcd::Identity(2, 2);
  }
  CHECK(dense_mismatch(build_multicarrier(Otfs{2, 2}, 4), kron) < 1e-15);
  CHECK_THROWS_AS(build_multicarrier(Otfs{3, 2}, 4), ConfigError);

  // IFDM is P F^H, identical to the single-block IBS adjoint kernel with no local permutation.
  const Eigen::MatrixXcd ifdm = materialize_dense(build_multicarrier(Ifdm{5}, 32));
  const Eigen::MatrixXcd ref = permutation_matrix(make_permutation(32, 5).mapping()) * dft_matrix(32).adjoint();
  CHECK((ifdm - ref).cwiseAbs().maxCoeff() < 1e-14);
  const IbsSpec w{32, 32, 32, IbsVariant::W_IBS, TransformBase::FFT, TransformDirection::KernelAdjoint, 0, 5};
  CHECK(dense_mismatch(build_ibs_transform(w), ref) < 1e-14);

  // AFDM chirp definition.
  const double c1 = 0.125;
  const double c2 = 0.03;
  Eigen::VectorXcd l1(16);
  Eigen::VectorXcd l2(16);
  for (int i = 0; i < 16; ++i) {
    l1(i) = std::polar(1.0, -2.0 * kPi * c1 * i * i);
    l2(i) = std::polar(1.0, -2.0 * kPi * c2 * i * i);
  }
  const Eigen::MatrixXcd afdm = l1.asDiagonal().toDenseMatrix().adjoint() * dft_matrix(16).adjoint() *
                                l2.asDiagonal().toDenseMatrix().adjoint();
  CHECK(dense_mismatch(build_multicarrier(Afdm{c1, c2}, 16), afdm) < 1e-12);
}

TEST_CASE("relative complexity reference rows") {
  const std::size_t ns[] = {128, 32, 8, 4};
  const double theta[] = {58.33, 41.67, 25.00, 16.67};
  const double overall[] = {69.69, 57.57, 45.45, 39.39};
  for (int i = 0; i < 4; ++i) {
    const RelativeComplexity rc = relative_complexity(4096, ns[i], 8.0);
    CHECK(std::abs(100.0 * rc.theta_ibs - theta[i]) <= 0.01);
    CHECK(std::abs(100.0 * rc.overall - overall[i]) <= 0.01);
  }
  const RelativeComplexity same = relative_complexity(4096, 4096, 8.0);
  CHECK(same.theta_ibs == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(same.overall == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_complexity(65536, 256, 8.0).theta_ibs == doctest::Approx(0.5).epsilon(1e-15));
  // Hand evaluation: (8 + 1 + 2*7) / (8 + 1 + 2*12) = 23 / 33.
  CHECK(relative_complexity(4096, 128, 8.0).overall == doctest::Approx(23.0 / 33.0).epsilon(1e-15));
  CHECK_THROWS_AS(relative_complexity(4096, 8192, 8.0), ConfigError);
}
