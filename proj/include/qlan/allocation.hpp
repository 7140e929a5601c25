#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qlan/source_model.hpp"

namespace qlan {

/// A logical link between two nodes. The first node occupies the first
/// tensor slot of the link state.
struct Link {
  std::string first;
  std::string second;

  std::string id() const { return first + "-" + second; }
  bool same_pair(const Link& other) const;
  friend bool operator==(const Link&, const Link&) = default;
};

/// Parses "A-B" (also accepts an en dash or "A/B").
Link parse_link(const std::string& text);

struct ChannelAssignment {
  int channel = 0;
  Link link;
};

/// Channel-to-link entries. Kept as a list so that invalid inputs (a channel
/// listed twice) can be represented and reported by validate().
struct ChannelAllocation {
  std::vector<ChannelAssignment> entries;

  std::vector<int> channels_for(const Link& link) const;
  std::optional<Link> link_for(int channel) const;
};

enum class ViolationKind { DoubleAssignment, SelfLink, UnknownNode, ChannelOutOfRange };

struct Violation {
  ViolationKind kind;
  int channel = 0;
  std::string detail;
};

const char* to_string(ViolationKind kind) noexcept;

std::vector<Violation> validate(const ChannelAllocation& alloc, const std::vector<std::string>& nodes,
                                int num_channels = 8);

struct LinkBudget {
  Link link;
  double loss_db = 0.0;             // fiber loss patch to patch
  double first_arm_fraction = 0.5;  // share of loss_db on the first node's arm
  double eff_first = 1.0;           // detector efficiency times analyzer insertion transmission
  double eff_second = 1.0;
  double duty_first = 1.0;          // detector gate duty cycle
  double duty_second = 1.0;
  double noise_first_hz = 0.0;      // ungated background and dark rate
  double noise_second_hz = 0.0;
  double dead_first_s = 0.0;
  double dead_second_s = 0.0;
  double timing_sigma_ns = 0.0;     // pairwise timing spread of the coincidence peak

  void validate() const;
  double transmission_first() const;
  double transmission_second() const;
};

struct PredictionOptions {
  double window_ns = 10.0;
};

struct LinkPrediction {
  Link link;
  std::vector<int> channels;
  double pair_rate = 0.0;
  double singles_first = 0.0;     // per analyzer setting, after dead time
  double singles_second = 0.0;
  double coincidence_rate = 0.0;  // true pairs summed over a basis pair
  double accidental_rate = 0.0;
  double visibility = 0.0;        // effective, including accidentals
  double fidelity = 0.25;
  double log_negativity = 0.0;
  double ebit_rate = 0.0;
};

/// Werner-model prediction per budget link. Throws InvalidAllocation when the
/// allocation fails validation against the nodes named by the budgets.
std::vector<LinkPrediction> predicted_link_rates(const ChannelAllocation& alloc,
                                                 const std::vector<ChannelPairSpec>& specs,
                                                 const std::vector<LinkBudget>& budgets,
                                                 const PredictionOptions& options = {});

double werner_log_negativity(double visibility) noexcept;

enum class ObjectiveKind { MaxMinRE, MaxTotalRE, MinFidelityFloor };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::MaxMinRE;
  double fidelity_floor = 0.0;
};

/// "max-min-re", "max-total-re" or "min-fidelity-floor=<f>".
Objective parse_objective(const std::string& text);
std::string to_string(const Objective& objective);

/// Objective value, or nullopt when the predictions violate a constraint.
std::optional<double> objective_value(const Objective& objective, const std::vector<LinkPrediction>& predictions);

struct OptimizeResult {
  ChannelAllocation allocation;
  std::vector<int> assignment;  // per channel: 0 unassigned, k for budgets[k-1]
  double score = 0.0;
  std::vector<LinkPrediction> predictions;
};

ChannelAllocation allocation_from_assignment(const std::vector<int>& assignment,
                                             const std::vector<LinkBudget>& budgets);

/// Exhaustive search over (links + 1)^channels assignments. Ties go to the
/// fewest assigned channels, then the lexicographically smallest assignment.
/// Scores are compared at 1e-6 ebits/s resolution. workers = 0 uses
/// worker_count().
OptimizeResult optimize(const Objective& objective, const std::vector<ChannelPairSpec>& specs,
                        const std::vector<LinkBudget>& budgets, const PredictionOptions& options = {},
                        unsigned workers = 0);

}  // namespace qlan
