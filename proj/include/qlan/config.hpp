#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qlan/allocation.hpp"
#include "qlan/polarization.hpp"
#include "qlan/source_model.hpp"
#include "qlan/timetag.hpp"

namespace qlan {

struct NodeConfig {
  std::string id;
  DetectorModel detector;
  double pps_sigma_ns = 0.0;
  double drift_ns_per_s = 0.0;
  double fiber_loss_db = 0.0;    // source patch panel to node
  double fiber_delay_ns = 0.0;
  double insertion_loss_db = 0.0;  // analyzer, WSS and coupling losses
};

struct JsiConfig {
  double integration_s = 5.0;
  double eff_signal = 1.0;
  double eff_idler = 1.0;
  double floor_rate_hz = 0.0;
  bool poisson = true;
};

struct PlanConfig {
  double integration_s = 60.0;
  double window_ns = 10.0;
  std::vector<std::string> bases{"HV", "DA"};
  int accidental_shifts = 8;
  double shift_ns = 100.0;
  int samples = 1024;
  std::int64_t histogram_span_bins = 10000;
  bool rsp = true;
};

struct RspTask {
  Link link;
  std::string sender;
  Label projection = Label::H;
  Label target = Label::H;

  std::string receiver() const { return sender == link.first ? link.second : link.first; }
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::uint32_t clock_resolution_ps = 5000;
  std::vector<NodeConfig> nodes;
  ChannelGrid grid;
  std::vector<ChannelPairSpec> channels;
  JsiConfig jsi;
  std::vector<Link> links;
  ChannelAllocation allocation;
  PlanConfig plan;
  std::vector<RspTask> rsp_tasks;
  std::string objective = "max-min-re";

  const NodeConfig& node(const std::string& id) const;
  std::vector<std::string> node_ids() const;
  LinkBudget budget(const Link& link) const;
  std::vector<LinkBudget> budgets() const;
  SimNode sim_node(const std::string& id) const;
};

/// Throws ConfigError with "<field path>: <problem>" (or "line L, column C"
/// for malformed JSON).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Serializes back to the config JSON layout.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace qlan
