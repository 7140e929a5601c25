#pragma once

#include <istream>
#include <string>
#include <vector>

#include "qlan/coincidence.hpp"
#include "qlan/experiment.hpp"

namespace qlan {

inline constexpr int kReportSchemaVersion = 1;

std::string link_report_json(const LinkReport& report);
std::string rsp_report_json(const RspReport& report);
/// Everything measured and estimated for one link (schema link_run).
std::string link_run_json(const LinkRun& run);
std::string experiment_json(const ExperimentResult& result);
std::string coincidence_json(const CoincidenceResult& result, const OffsetEstimate& offset, const std::string& first_node,
                             const std::string& second_node);

/// Columns: link,channels,counts,coincidence_rate,fidelity,fidelity_std,
/// log_negativity,log_negativity_std,ebit_rate,ebit_rate_std
std::string results_csv(const ExperimentResult& result);
/// Columns: link,sender,projection,target,sample,s1,s2,s3
std::string poincare_csv(const ExperimentResult& result);
/// Columns: sample,fidelity,log_negativity,ebit_rate
std::string samples_csv(const LinkReport& report);
/// Columns: delay_bins,delay_ns,count
std::string histogram_csv(const DelayHistogram& hist);

/// Counts table with header setting1,setting2,count. A setting is a label
/// (H V D A R L) or "qwp/hwp" in degrees. Throws ConfigError naming the line.
std::vector<MeasurementRecord> read_counts_csv(std::istream& in, double integration_s);

}  // namespace qlan
