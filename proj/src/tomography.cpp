#include "qlan/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "qlan/random.hpp"

namespace qlan {

namespace {

constexpr double kFloor = 1e-12;

using AxisKey = std::array<long long, 3>;

// Measurement axis of an analyzer state, with the sign fixed so that the
// first significant component is positive.
AxisKey axis_key(const Ket2& chi) {
  const Complex a = chi(0), b = chi(1);
  std::array<double, 3> r = {2.0 * (std::conj(a) * b).real(), 2.0 * (std::conj(a) * b).imag(),
                             std::norm(a) - std::norm(b)};
  for (double c : r) {
    if (std::abs(c) > 1e-6) {
      if (c < 0.0)
        for (double& x : r) x = -x;
      break;
    }
  }
  AxisKey k;
  for (int i = 0; i < 3; ++i) k[static_cast<std::size_t>(i)] = std::llround(r[static_cast<std::size_t>(i)] * 1e6);
  return k;
}

template <int Dim>
struct Problem {
  using Ket = Eigen::Matrix<Complex, Dim, 1>;
  std::vector<Ket> kets;
  std::vector<double> counts;
  std::vector<int> group;
  int num_groups = 0;
  std::uint64_t hash = 0;

  double log_likelihood(const Eigen::Matrix<Complex, Dim, Dim>& rho) const {
    if (kets.empty()) return 0.0;
    std::vector<double> p(kets.size());
    std::vector<double> sums(static_cast<std::size_t>(num_groups), 0.0);
    for (std::size_t i = 0; i < kets.size(); ++i) {
      p[i] = std::max(0.0, kets[i].dot(rho * kets[i]).real());
      sums[static_cast<std::size_t>(group[i])] += p[i];
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < kets.size(); ++i) {
      if (counts[i] == 0.0) continue;
      const double s = sums[static_cast<std::size_t>(group[i])];
      ll += counts[i] * std::log(kFloor + (s > 0.0 ? p[i] / s : 0.0));
    }
    return ll;
  }
};

struct Key2 {
  double q1, h1, q2, h2;
  auto tie() const { return std::tie(q1, h1, q2, h2); }
  bool operator<(const Key2& o) const { return tie() < o.tie(); }
};

Problem<4> build_problem(const std::vector<MeasurementRecord>& records) {
  std::map<Key2, double> merged;
  for (const auto& r : records) {
    merged[{r.first.qwp_deg(), r.first.hwp_deg(), r.second.qwp_deg(), r.second.hwp_deg()}] += static_cast<double>(r.count);
  }
  Problem<4> pr;
  std::map<std::pair<AxisKey, AxisKey>, int> groups;
  std::uint64_t h = fnv1a("two-qubit");
  for (const auto& [k, count] : merged) {
    const Ket2 a = analyzer_state(AnalyzerSetting(k.q1, k.h1));
    const Ket2 b = analyzer_state(AnalyzerSetting(k.q2, k.h2));
    pr.kets.push_back(states::product(a, b));
    pr.counts.push_back(count);
    const auto key = std::make_pair(axis_key(a), axis_key(b));
    auto it = groups.find(key);
    if (it == groups.end()) it = groups.emplace(key, static_cast<int>(groups.size())).first;
    pr.group.push_back(it->second);
    for (double v : {k.q1, k.h1, k.q2, k.h2, count}) h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(v * 1e6)));
  }
  pr.num_groups = static_cast<int>(groups.size());
  pr.hash = h;
  return pr;
}

Problem<2> build_problem(const std::vector<QubitRecord>& records) {
  std::map<std::pair<double, double>, double> merged;
  for (const auto& r : records) merged[{r.setting.qwp_deg(), r.setting.hwp_deg()}] += static_cast<double>(r.count);
  Problem<2> pr;
  std::map<AxisKey, int> groups;
  std::uint64_t h = fnv1a("one-qubit");
  for (const auto& [k, count] : merged) {
    const Ket2 a = analyzer_state(AnalyzerSetting(k.first, k.second));
    pr.kets.push_back(a);
    pr.counts.push_back(count);
    const auto key = axis_key(a);
    auto it = groups.find(key);
    if (it == groups.end()) it = groups.emplace(key, static_cast<int>(groups.size())).first;
    pr.group.push_back(it->second);
    for (double v : {k.first, k.second, count}) h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(v * 1e6)));
  }
  pr.num_groups = static_cast<int>(groups.size());
  pr.hash = h;
  return pr;
}

double autocorrelation(const std::vector<double>& x, std::size_t lag) {
  const std::size_t n = x.size();
  if (lag >= n) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  if (var <= 1e-12 * static_cast<double>(n)) return 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) cov += (x[i] - mean) * (x[i + lag] - mean);
  return cov / var;
}

double split_rhat(const std::vector<double>& x) {
  const std::size_t half = x.size() / 2;
  if (half < 2) return 1.0;
  auto stats = [&](std::size_t from) {
    double m = 0.0;
    for (std::size_t i = from; i < from + half; ++i) m += x[i];
    m /= static_cast<double>(half);
    double v = 0.0;
    for (std::size_t i = from; i < from + half; ++i) v += (x[i] - m) * (x[i] - m);
    return std::make_pair(m, v / static_cast<double>(half - 1));
  };
  const auto [m1, v1] = stats(0);
  const auto [m2, v2] = stats(half);
  const double w = 0.5 * (v1 + v2);
  if (w <= 1e-300) return std::abs(m1 - m2) < 1e-12 ? 1.0 : std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(half);
  const double b = n * 0.5 * ((m1 - m2) * (m1 - m2));  // between-chain variance for two chains
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

template <int Dim>
class Chain {
 public:
  using Mat = Eigen::Matrix<Complex, Dim, Dim>;

  Chain(const Problem<Dim>& problem, std::uint64_t seed) : problem_(problem), rng_(seed) {
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) g_(i, j) = Complex(normal_(rng_), normal_(rng_)) * std::sqrt(0.5);
    refresh();
  }

  Mat rho() const {
    const Mat m = g_ * g_.adjoint();
    return m / m.trace().real();
  }

  double log_likelihood() const { return ll_; }

  bool step(double size) {
    Mat proposal = g_;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) proposal(i, j) += Complex(normal_(rng_), normal_(rng_)) * (size * std::sqrt(0.5));
    const double prior = -proposal.squaredNorm();
    const Mat m = proposal * proposal.adjoint();
    const double tr = m.trace().real();
    if (!(tr > 0.0)) return false;
    const double ll = problem_.log_likelihood(m / tr);
    const double log_ratio = (ll + prior) - (ll_ + prior_);
    if (log_ratio >= 0.0 || std::log(uniform_(rng_)) < log_ratio) {
      g_ = proposal;
      ll_ = ll;
      prior_ = prior;
      return true;
    }
    return false;
  }

 private:
  void refresh() {
    prior_ = -g_.squaredNorm();
    ll_ = problem_.log_likelihood(rho());
  }

  const Problem<Dim>& problem_;
  Rng rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  Mat g_;
  double ll_ = 0.0;
  double prior_ = 0.0;
};

template <int Dim>
PosteriorEnsemble<Dim> run_sampler(const Problem<Dim>& problem, const SamplerOptions& options) {
  if (options.num_samples < 2) fail(ErrorCode::InvalidArgument, "need at least two posterior samples");
  const std::uint64_t seed = derive_seed(options.seed, problem.hash);
  Chain<Dim> chain(problem, seed);

  // Step-size tuning doubles as the initial climb towards the posterior bulk,
  // so it is repeated once the chain has settled.
  double size = 0.3;
  auto tune = [&]() {
    constexpr int kBatch = 200;
    int in_band = 0;
    for (int batch = 0; batch < 2000; ++batch) {
      int accepted = 0;
      for (int i = 0; i < kBatch; ++i) accepted += chain.step(size);
      const double acceptance = static_cast<double>(accepted) / kBatch;
      if (acceptance >= 0.2 && acceptance <= 0.4) {
        if (++in_band >= 5 && batch >= 20) break;
      } else {
        in_band = 0;
        size = std::clamp(size * std::exp((acceptance - 0.3) * 2.0), 1e-7, 5.0);
      }
    }
  };
  tune();
  for (int i = 0; i < 10000; ++i) chain.step(size);
  tune();

  SamplerDiagnostics diag;
  diag.step_size = size;
  int thinning = 1;
  {
    // Pilot run to pick the thinning interval. The log-likelihood alone is
    // flat without data, so purity and one population are tracked as well.
    constexpr int kPilot = 20000;
    std::array<std::vector<double>, 3> traces;
    for (auto& t : traces) t.reserve(kPilot);
    for (int i = 0; i < kPilot; ++i) {
      chain.step(size);
      const auto r = chain.rho();
      traces[0].push_back(chain.log_likelihood());
      traces[1].push_back((r * r).trace().real());
      traces[2].push_back(r(0, 0).real());
    }
    auto correlated = [&](int lag) {
      for (const auto& t : traces)
        if (autocorrelation(t, static_cast<std::size_t>(lag)) >= 0.1) return true;
      return false;
    };
    while (thinning < options.max_thinning && correlated(thinning)) {
      thinning = thinning < 8 ? thinning + 1 : thinning * 5 / 4;
    }
  }

  for (int attempt = 1; attempt <= 3; ++attempt) {
    const int burn = 10 * thinning;
    for (int i = 0; i < burn; ++i) chain.step(size);
    PosteriorEnsemble<Dim> out;
    out.samples.reserve(static_cast<std::size_t>(options.num_samples));
    std::vector<double> ll;
    long long accepted = 0, total = 0;
    typename Chain<Dim>::Mat sum = Chain<Dim>::Mat::Zero();
    for (int s = 0; s < options.num_samples; ++s) {
      for (int t = 0; t < thinning; ++t) {
        accepted += chain.step(size);
        ++total;
      }
      const auto r = chain.rho();
      sum += r;
      out.samples.emplace_back(typename Chain<Dim>::Mat((r + r.adjoint()) * 0.5));
      ll.push_back(chain.log_likelihood());
    }
    diag.acceptance = static_cast<double>(accepted) / static_cast<double>(total);
    diag.thinning = thinning;
    diag.burn_in = burn;
    diag.rhat = split_rhat(ll);
    diag.attempts = attempt;
    if (diag.rhat <= options.rhat_limit) {
      const typename Chain<Dim>::Mat mean = sum / static_cast<double>(options.num_samples);
      out.mean = DensityMatrix<Dim>(typename Chain<Dim>::Mat((mean + mean.adjoint()) * 0.5));
      out.diagnostics = diag;
      return out;
    }
    thinning = std::min(options.max_thinning, thinning * 2);
  }
  fail(ErrorCode::ChainNotConverged,
       "split-chain statistic " + std::to_string(diag.rhat) + " exceeds " + std::to_string(options.rhat_limit));
}

}  // namespace

double log_likelihood(const DensityMatrix2Q& rho, const std::vector<MeasurementRecord>& records) {
  return build_problem(records).log_likelihood(rho.matrix());
}

double log_likelihood(const DensityMatrix1Q& rho, const std::vector<QubitRecord>& records) {
  return build_problem(records).log_likelihood(rho.matrix());
}

PosteriorEnsemble<4> sample_posterior(const std::vector<MeasurementRecord>& records, const SamplerOptions& options) {
  return run_sampler(build_problem(records), options);
}

PosteriorEnsemble<2> qubit_tomography(const std::vector<QubitRecord>& records, const SamplerOptions& options) {
  return run_sampler(build_problem(records), options);
}

Estimate mean_std(const std::vector<double>& values) {
  Estimate e;
  if (values.empty()) return e;
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double v = 0.0;
    for (double x : values) v += (x - e.mean) * (x - e.mean);
    e.std = std::sqrt(v / static_cast<double>(values.size() - 1));
  }
  return e;
}

LinkReport summarize_link(const PosteriorEnsemble<4>& ensemble, double coincidence_rate, const Ket4& target) {
  if (!(coincidence_rate >= 0.0)) fail(ErrorCode::InvalidArgument, "coincidence rate must be >= 0");
  LinkReport r;
  r.mean = ensemble.mean;
  r.coincidence_rate = coincidence_rate;
  r.num_samples = static_cast<int>(ensemble.samples.size());
  r.diagnostics = ensemble.diagnostics;
  std::vector<double> re;
  for (const auto& s : ensemble.samples) {
    r.sample_fidelity.push_back(fidelity_with_pure(s, target));
    r.sample_log_negativity.push_back(log_negativity(s));
    re.push_back(ebit_rate(r.sample_log_negativity.back(), coincidence_rate));
  }
  r.fidelity = mean_std(r.sample_fidelity);
  r.log_negativity = mean_std(r.sample_log_negativity);
  r.ebit_rate = mean_std(re);
  return r;
}

}  // namespace qlan
