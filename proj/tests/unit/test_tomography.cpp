#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "qlan/tomography.hpp"

using namespace qlan;

namespace {

std::vector<MeasurementRecord> two_basis(const DensityMatrix2Q& rho, double per_basis) {
  std::vector<MeasurementRecord> out;
  for (auto basis : {std::pair{Label::H, Label::V}, std::pair{Label::D, Label::A}})
    for (Label a : {basis.first, basis.second})
      for (Label b : {basis.first, basis.second}) {
        const double p = coincidence_probability(rho, setting_for(a), setting_for(b));
        out.push_back({setting_for(a), setting_for(b), static_cast<std::uint64_t>(std::llround(p * per_basis)), 60.0});
      }
  return out;
}

std::vector<QubitRecord> qubit_counts(const Ket2& psi, double per_basis, std::vector<Label> labels) {
  const auto rho = DensityMatrix1Q::pure(psi);
  std::vector<QubitRecord> out;
  for (Label l : labels) {
    const double p = projection_probability(rho, setting_for(l));
    out.push_back({setting_for(l), static_cast<std::uint64_t>(std::llround(p * per_basis)), 60.0});
  }
  return out;
}

const std::vector<Label> kSix = {Label::H, Label::V, Label::D, Label::A, Label::R, Label::L};

}  // namespace

TEST_CASE("likelihood prefers the generating Bell state") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  const auto records = two_basis(psi, 1000.0);
  const double best = log_likelihood(psi, records);
  for (auto b : {states::Bell::PsiMinus, states::Bell::PhiPlus, states::Bell::PhiMinus}) {
    CHECK(log_likelihood(DensityMatrix2Q::pure(states::bell(b)), records) < best);
  }
  CHECK(log_likelihood(DensityMatrix2Q(), records) < best);

  auto zero = records;
  for (auto& r : zero) r.count = 0;
  CHECK(log_likelihood(psi, zero) == 0.0);

  std::vector<MeasurementRecord> bad{{setting_for(Label::H), setting_for(Label::H), 3, 1.0},
                                     {setting_for(Label::H), setting_for(Label::V), 0, 1.0}};
  CHECK(log_likelihood(psi, bad) <= 3.0 * std::log(1e-12) + 1e-6);
}

TEST_CASE("posterior recovers Psi+ from two bases") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  const auto ens = sample_posterior(two_basis(psi, 1e4), {256, 3});
  CHECK(ens.samples.size() == 256);
  CHECK(fidelity_with_pure(ens.mean, states::bell(states::Bell::PsiPlus)) >= 0.99);
  Matrix4 avg = Matrix4::Zero();
  for (const auto& s : ens.samples) avg += s.matrix();
  avg /= static_cast<double>(ens.samples.size());
  CHECK((avg - ens.mean.matrix()).norm() < 1e-12);
  CHECK(ens.diagnostics.rhat <= 1.1);
}

TEST_CASE("no data samples the prior") {
  const auto ens = sample_posterior({}, {1024, 5});
  CHECK((ens.mean.matrix() - Matrix4::Identity() / 4.0).norm() < 0.05);
}

TEST_CASE("record order does not change the posterior") {
  const auto rho = states::werner(0.7);
  auto records = two_basis(rho, 2000.0);
  const auto a = sample_posterior(records, {128, 9});
  std::reverse(records.begin(), records.end());
  std::swap(records[1], records[5]);
  const auto b = sample_posterior(records, {128, 9});
  CHECK((a.mean.matrix() - b.mean.matrix()).norm() == 0.0);

  // Split counts for the same setting merge before sampling.
  auto split = records;
  split.push_back(split[0]);
  split[0].count /= 2;
  split.back().count -= split[0].count;
  const auto c = sample_posterior(split, {128, 9});
  CHECK((a.mean.matrix() - c.mean.matrix()).norm() == 0.0);
}

TEST_CASE("summaries of fixed ensembles") {
  PosteriorEnsemble<4> pure;
  pure.samples.assign(16, DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus)));
  pure.mean = pure.samples.front();
  const auto r = summarize_link(pure, 52.4);
  CHECK(r.fidelity.mean == doctest::Approx(1.0));
  CHECK(r.fidelity.std == doctest::Approx(0.0));
  CHECK(r.log_negativity.mean == doctest::Approx(1.0));
  CHECK(r.ebit_rate.mean == doctest::Approx(52.4));

  PosteriorEnsemble<4> mixed;
  mixed.samples.assign(16, DensityMatrix2Q());
  const auto m = summarize_link(mixed, 100.0);
  CHECK(m.log_negativity.mean == 0.0);
  CHECK(m.ebit_rate.mean == 0.0);
}

TEST_CASE("qubit tomography") {
  const Ket2 r_state = label_state(Label::R);
  auto ens = qubit_tomography(qubit_counts(r_state, 1e4, kSix), {512, 1});
  CHECK(fidelity_with_pure(ens.mean, r_state) >= 0.99);

  std::vector<QubitRecord> flat;
  for (Label l : kSix) flat.push_back({setting_for(l), 1000, 1.0});
  ens = qubit_tomography(flat, {512, 2});
  CHECK((ens.mean.matrix() - Matrix2::Identity() / 2.0).norm() < 0.02);

  const Ket2 d_state = label_state(Label::D);
  ens = qubit_tomography(qubit_counts(d_state, 1e4, {Label::H, Label::V}), {1024, 3});
  std::vector<double> f;
  for (const auto& s : ens.samples) f.push_back(fidelity_with_pure(s, d_state));
  CHECK(mean_std(f).std >= 0.05);
}

TEST_CASE("posterior contracts with more data") {
  const auto rho = states::werner(0.6);
  auto spread = [&](double n) {
    const auto ens = sample_posterior(two_basis(rho, n), {512, 4});
    return summarize_link(ens, 1.0).fidelity.std;
  };
  const double s1 = spread(2000.0);
  const double s2 = spread(4000.0);
  CHECK(s2 <= s1 * 1.15);
}
