#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlan/polarization.hpp"

namespace qlan {

struct MeasurementRecord {
  AnalyzerSetting first;
  AnalyzerSetting second;
  std::uint64_t count = 0;
  double integration_s = 0.0;
};

struct QubitRecord {
  AnalyzerSetting setting;
  std::uint64_t count = 0;
  double integration_s = 0.0;
};

/// Multinomial log-likelihood. Records are grouped into basis pairs (the
/// same measurement axis up to sign on each node); within a group the
/// projector probabilities are renormalized over the outcomes present and
/// floored at 1e-12.
double log_likelihood(const DensityMatrix2Q& rho, const std::vector<MeasurementRecord>& records);
double log_likelihood(const DensityMatrix1Q& rho, const std::vector<QubitRecord>& records);

struct SamplerOptions {
  int num_samples = 1024;
  std::uint64_t seed = 0;
  double rhat_limit = 1.1;
  int max_thinning = 2000;
};

struct SamplerDiagnostics {
  double step_size = 0.0;
  double acceptance = 0.0;
  int thinning = 1;
  int burn_in = 0;
  double rhat = 1.0;
  int attempts = 1;
};

template <int Dim>
struct PosteriorEnsemble {
  std::vector<DensityMatrix<Dim>> samples;
  DensityMatrix<Dim> mean;
  SamplerDiagnostics diagnostics;
};

/// Random-walk Metropolis over rho = G G^dagger / tr(G G^dagger) with iid
/// complex Gaussian G (Hilbert-Schmidt prior). Deterministic for a given
/// seed and record multiset; record order does not matter. Throws
/// ChainNotConverged when the split-chain statistic on the log-likelihood
/// stays above the limit.
PosteriorEnsemble<4> sample_posterior(const std::vector<MeasurementRecord>& records,
                                      const SamplerOptions& options = {});
PosteriorEnsemble<2> qubit_tomography(const std::vector<QubitRecord>& records, const SamplerOptions& options = {});

struct Estimate {
  double mean = 0.0;
  double std = 0.0;
};

Estimate mean_std(const std::vector<double>& values);

struct LinkReport {
  std::string link;
  std::string counts_kind = "raw";  // raw or subtracted
  DensityMatrix2Q mean;
  Estimate fidelity;
  Estimate log_negativity;
  Estimate ebit_rate;
  double coincidence_rate = 0.0;
  int num_samples = 0;
  SamplerDiagnostics diagnostics;
  std::vector<double> sample_fidelity;
  std::vector<double> sample_log_negativity;
};

/// Per-sample fidelity against target, E_N and R_E = E_N * rate.
LinkReport summarize_link(const PosteriorEnsemble<4>& ensemble, double coincidence_rate,
                          const Ket4& target = states::bell(states::Bell::PsiPlus));

}  // namespace qlan
