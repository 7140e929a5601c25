#include "doctest.h"

#include <cmath>

#include "qlan/source_model.hpp"

using namespace qlan;

TEST_CASE("channel grid matches the ITU table") {
  auto f1 = channel_frequencies(1);
  CHECK(f1.signal_thz == doctest::Approx(192.325));
  CHECK(f1.idler_thz == doctest::Approx(192.300));
  CHECK(f1.signal_itu == doctest::Approx(23.25));
  CHECK(f1.idler_itu == doctest::Approx(23.00));
  auto f8 = channel_frequencies(8);
  CHECK(f8.signal_thz == doctest::Approx(192.500));
  CHECK(f8.idler_thz == doctest::Approx(192.125));
  CHECK(f8.idler_itu == doctest::Approx(21.25));
  for (int n = 1; n <= 8; ++n) {
    const auto f = channel_frequencies(n);
    CHECK(f.signal_units + f.idler_units == 2 * 15385);
  }
  CHECK(channel_frequencies(4).signal_thz + channel_frequencies(4).idler_thz == doctest::Approx(384.625));
  CHECK_THROWS_AS(channel_frequencies(0), Error);
  CHECK_THROWS_AS(channel_frequencies(9), Error);
}

TEST_CASE("channel state fidelity follows the visibility") {
  const Ket4 psi_plus = states::bell(states::Bell::PsiPlus);
  ChannelPairSpec s;
  CHECK(fidelity_with_pure(channel_state(s), psi_plus) == doctest::Approx(1.0));
  s.visibility = 0.936;
  CHECK(fidelity_with_pure(channel_state(s), psi_plus) == doctest::Approx(0.952));
  s.visibility = 1.0;
  s.bell_phase_deg = 180.0;
  CHECK(fidelity_with_pure(channel_state(s), psi_plus) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fidelity_with_pure(channel_state(s), states::bell(states::Bell::PsiMinus)) == doctest::Approx(1.0));
  for (double v = 0.0; v <= 1.0; v += 0.05) {
    ChannelPairSpec t;
    t.visibility = v;
    t.bell_phase_deg = 37.0 * v;
    const auto rho = channel_state(t);
    t.bell_phase_deg = 0.0;
    CHECK(fidelity_with_pure(channel_state(t), psi_plus) == doctest::Approx((1 + 3 * v) / 4).epsilon(1e-12));
    CHECK(hermitian_eigen(MatrixX(rho.matrix())).values(0) > -1e-12);
  }
  CHECK(visibility_from_fidelity(0.952) == doctest::Approx(0.936));
  s.visibility = 1.2;
  CHECK_THROWS_AS(channel_state(s), Error);
}

TEST_CASE("jsi and car") {
  std::vector<ChannelPairSpec> specs(8);
  for (int i = 0; i < 8; ++i) {
    specs[i].index = i + 1;
    specs[i].pair_rate = 1000.0;
  }
  JsiOptions opt;
  opt.integration_s = 1.0;
  auto m = jsi_matrix(specs, opt);
  CHECK(m.diagonal().sum() == doctest::Approx(8000.0));
  CHECK(m.sum() - m.diagonal().sum() == 0.0);
  CHECK_THROWS_AS(car(m), Error);

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(8, 8, 10.0);
  flat.diagonal().setConstant(100.0);
  CHECK(car(flat) == doctest::Approx(10.0));

  for (auto& s : specs) s.crosstalk_fraction = 0.1;
  m = jsi_matrix(specs, opt);
  CHECK(m(3, 2) == doctest::Approx(100.0));
  CHECK(m(2, 3) == 0.0);
  CHECK(m(0, 7) == 0.0);

  for (auto& s : specs) s.pair_rate = 0.0;
  CHECK_THROWS_AS(car(jsi_matrix(specs, opt)), Error);

  opt.floor_rate_hz = 5.0;
  opt.poisson = true;
  opt.seed = 3;
  const auto a = jsi_matrix(specs, opt);
  const auto b = jsi_matrix(specs, opt);
  CHECK(a == b);
  CHECK(a.mean() == doctest::Approx(5.0).epsilon(0.15));
}

TEST_CASE("mixture state weights channels by rate") {
  ChannelPairSpec a, b;
  a.pair_rate = 3.0;
  b.pair_rate = 1.0;
  b.bell_phase_deg = 180.0;
  const auto rho = mixture_state({a, b});
  CHECK(fidelity_with_pure(rho, states::bell(states::Bell::PsiPlus)) == doctest::Approx(0.75));
}
