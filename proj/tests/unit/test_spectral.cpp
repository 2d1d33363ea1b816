#include "doctest.h"
#include "ibs/spectral.hpp"
#include "util.hpp"

using namespace ibs;
using namespace testutil;

TEST_CASE("eigen bounds of simple operators") {
  const EigenBounds id = eigen_bounds(identity_operator(8), DiagonalStructure{RVec(8, 1.0)});
  CHECK(id.lambda_min == 1.0);
  CHECK(id.lambda_max == 1.0);
  CHECK(id.lambda_dagger == 1.0);

  const RVec alpha{2.0, 1.0};
  const EigenBounds d = eigen_bounds(diagonal_operator(CVec{2.0, 1.0}), DiagonalStructure{alpha});
  CHECK(d.lambda_min == doctest::Approx(1.0));
  CHECK(d.lambda_max == doctest::Approx(4.0));
  CHECK(d.lambda_dagger == doctest::Approx(2.5));
  CHECK(d.method == SpectralMethod::ExactDiagonal);
}

TEST_CASE("eigen bounds match a dense eigensolver") {
  for (double spread : {0.0, 0.01}) {
    const MultipathChannel ch = gen_multipath_channel(64, 4, spread, 9);
    const Eigen::MatrixXcd a = materialize_dense(ch.op());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a * a.adjoint());
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    OperatorStructure st = GeneralStructure{};
    if (!ch.time_varying()) st = CirculantStructure{ch.circulant_column()};
    const EigenBounds b = eigen_bounds(ch.op(), st);
    CHECK(std::abs(b.lambda_min - lo) < 1e-8);
    CHECK(std::abs(b.lambda_max - hi) < 1e-8);
    CHECK(b.lambda_dagger == doctest::Approx(0.5 * (lo + hi)));

    // Beyond the dense cap the iterative path must land within its tolerance.
    const EigenBounds it = eigen_bounds(ch.op(), GeneralStructure{}, 8);
    CHECK(it.method == SpectralMethod::Stochastic);
    CHECK(std::abs(it.lambda_max - hi) / hi < 1e-5);
    CHECK(std::abs(it.lambda_min - lo) / hi < 1e-5);
  }
}

TEST_CASE("trace moments by hand") {
  const RVec ones(5, 1.0);
  const RVec w_id = trace_moments(ones, 1.0, 4, 5);
  CHECK(w_id[0] == 1.0);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(w_id[k] == 0.0);

  const RVec w = trace_moments(RVec{4.0, 1.0}, 2.5, 2, 2);
  CHECK(w[0] == doctest::Approx(2.5));
  CHECK(w[1] == doctest::Approx(-2.25));
  CHECK(w[2] == doctest::Approx((4.0 * 2.25 + 1.0 * 2.25) / 2.0));
}

TEST_CASE("stochastic moments agree with the exact sum") {
  Xoshiro256 rng(3);
  RVec alpha(300);
  for (auto& a : alpha) a = 0.3 + 1.5 * rng.uniform();
  CVec d(alpha.begin(), alpha.end());
  RVec eig(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) eig[i] = alpha[i] * alpha[i];
  const double lo = *std::min_element(eig.begin(), eig.end());
  const double hi = *std::max_element(eig.begin(), eig.end());
  const double ld = 0.5 * (lo + hi);
  const RVec w = trace_moments(eig, ld, 6, 512);
  const RVec b = scaled_moments_stochastic(diagonal_operator(d), ld, 6, 512);
  for (std::size_t k = 0; k <= 6; ++k) {
    const double exact = w[k] / std::pow(ld, static_cast<double>(k));
    CHECK(std::abs(b[k] - exact) <= 0.01 * std::abs(exact));
  }

  // A dense, non-diagonal operator: probes are no longer exact, the bound is 1%.
  const Eigen::MatrixXcd m = random_matrix(64, 64, rng) / 8.0 + Eigen::MatrixXcd::Identity(64, 64);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m * m.adjoint());
  RVec ev(es.eigenvalues().data(), es.eigenvalues().data() + 64);
  const double ld2 = 0.5 * (ev.front() + ev.back());
  const RVec w2 = trace_moments(ev, ld2, 2, 64);
  StochasticOptions opts;
  opts.probes = 4096;
  const RVec b2 = scaled_moments_stochastic(dense_operator(m), ld2, 2, 64, opts);
  CHECK(std::abs(b2[0] - w2[0]) <= 0.01 * std::abs(w2[0]));
}

TEST_CASE("moment invariants") {
  Xoshiro256 rng(4);
  const Eigen::MatrixXcd a = random_matrix(16, 16, rng);
  const Eigen::MatrixXcd q = random_unitary(16, rng);
  const SpectralProfile p1 = spectral_profile(dense_operator(a), GeneralStructure{}, 6, 16);
  const SpectralProfile p2 = spectral_profile(dense_operator(q * a * q.adjoint()), GeneralStructure{}, 6, 16);
  CHECK(p1.method == SpectralMethod::DenseEigen);
  for (std::size_t k = 0; k <= 6; ++k) CHECK(std::abs(p1.w[k] - p2.w[k]) <= 1e-9 * std::abs(p1.w[0]) * std::pow(p1.lambda_dagger, k));

  const double half_width = 0.5 * (p1.lambda_max - p1.lambda_min);
  for (std::size_t k = 0; k <= 6; ++k) {
    CHECK(std::abs(p1.w[k]) <= p1.w[0] * std::pow(half_width, static_cast<double>(k)) * (1.0 + 1e-12));
    CHECK(p1.b[k] == doctest::Approx(p1.w[k] / std::pow(p1.lambda_dagger, static_cast<double>(k))));
  }
  CHECK(p1.lambda_dagger == doctest::Approx(0.5 * (p1.lambda_min + p1.lambda_max)));
  CHECK(p1.trace == doctest::Approx((a * a.adjoint()).trace().real()));
  CHECK(p1.w[0] == doctest::Approx(p1.trace / 16.0));

  const auto j = to_json(p1);
  CHECK(j.at("method") == "dense-eigen");
}

TEST_CASE("profile method selection") {
  const SensingDiagonal sd = gen_sensing_diagonal(8, 16, 4.0);
  CHECK(spectral_profile(sd.op(), DiagonalStructure{sd.singulars}, 4, 16).method == SpectralMethod::ExactDiagonal);
  const MultipathChannel ch = gen_multipath_channel(32, 3, 0.0, 1);
  CHECK(spectral_profile(ch.op(), CirculantStructure{ch.circulant_column()}, 4, 32).method ==
        SpectralMethod::ExactCirculant);
  const SpectralProfile st = spectral_profile(ch.op(), GeneralStructure{}, 4, 32, {}, 8);
  CHECK(st.method == SpectralMethod::Stochastic);
  const SpectralProfile ex = spectral_profile(ch.op(), CirculantStructure{ch.circulant_column()}, 4, 32);
  for (std::size_t k = 0; k <= 2; ++k) CHECK(std::abs(st.b[k] - ex.b[k]) <= 0.05 * std::abs(ex.b[0]));
}
