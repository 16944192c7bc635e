#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltm/em.hpp"
#include "ltm/model.hpp"
#include "ltm/report.hpp"

namespace ltm {

struct FeatureGroup {
  // Usually the latent aspect the symptoms came from; names the intermediate latent.
  std::string label;
  std::vector<std::string> symptoms;
  // Cardinality of the intermediate latent; 0 picks 2 or 3 by BIC.
  int cardinality = 2;
};

struct FeatureGroupSpec {
  std::string target_label;
  std::vector<FeatureGroup> groups;
  std::vector<int> z_cardinalities;

  // Disjoint nonempty groups, unique labels, positive cardinalities.
  void check() const;
  std::vector<std::string> symptoms() const;
};

/// Z is the root. A single-symptom group hangs its symptom directly off Z;
/// a larger group gets an intermediate latent, named after the group label,
/// between Z and its symptoms. Node order is Z, then each group in turn.
/// Symptoms default to binary unless listed in `symptom_cardinalities`.
/// Auto-cardinality groups get 2 here.
LatentTreeModel build_skeleton(const FeatureGroupSpec& spec, int z_cardinality,
                               const std::map<std::string, int>& symptom_cardinalities = {},
                               const std::string& z_name = "Z");

struct JointFit {
  std::vector<int> z_cardinalities;
  std::vector<FitResult> fits;
  std::size_t selected = 0;
  // Intermediate cardinality chosen per group, in spec order (1 for singletons).
  std::vector<int> group_cardinalities;
  const FitResult& best() const { return fits[selected]; }
};

/// Fits build_skeleton for each Z cardinality and keeps the largest BIC
/// (smaller cardinality on ties within 1e-6). Auto-cardinality groups are
/// then tried at 3, one at a time, keeping changes that raise the BIC.
JointFit fit_joint(const DataSet& data, const FeatureGroupSpec& spec, const EmConfig& config,
                   const std::string& z_name = "Z");

// Tab-separated "Z cardinality, loglik, BIC, dimension, selected" table.
std::string format_joint_bic_table(const JointFit& fit);

struct SymptomSummary {
  std::string name;
  double p_target = 0.0;      // P(X present | Z in target), smoothed
  double p_complement = 0.0;  // P(X present | Z not in target), smoothed
  double p_marginal = 0.0;    // P(X present)
  double mi = 0.0;            // I(Z; X) in nats
};

struct ClassSummary {
  std::string latent;
  std::string target_label;
  std::vector<int> target_states;
  double prior_target = 0.0;
  double prior_complement = 0.0;
  std::vector<SymptomSummary> symptoms;
  double smoothing = 0.0;
};

inline constexpr double kDefaultSmoothing = 1e-6;

/// Collapses the target states of `latent` into one class. Conditionals are
/// smoothed at the joint level, (P(X,T) + c) / (P(T) + 2c), on the presence
/// indicator of each observed variable.
ClassSummary merge_summary(const LatentTreeModel& model, std::string_view latent,
                           std::span<const int> target_states, double smoothing = kDefaultSmoothing);

struct CicRow {
  std::string symptom;
  double mi = 0.0;
  double cic = 0.0;
};

struct CicTable {
  std::vector<CicRow> rows;  // MI descending, ties by name
  // First row whose coverage reaches 0.95; rows.size() if none.
  std::size_t cut = 0;
  bool exact = true;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr double kCicCut = 0.95;
inline constexpr std::size_t kCicSamples = 1000000;

/// Cumulative information coverage I(Z; X_1..k) / I(Z; X_1..n). Exact by
/// enumeration when the symptoms' joint state space is at most 2^20;
/// otherwise a Monte Carlo average of the exact posterior information over
/// `samples` forward samples.
CicTable cic_table(const LatentTreeModel& model, std::string_view latent, std::span<const std::string> symptoms,
                   std::uint64_t seed = 0, std::size_t samples = kCicSamples);

// I(Z; X_S) in nats, exact.
double joint_mutual_info(const LatentTreeModel& model, std::string_view latent, std::span<const std::string> symptoms);

struct JointRow {
  std::string symptom;
  std::vector<double> presence;  // P(X present | Z=s)
  std::optional<double> merged;
  double mi = 0.0;
  double cic = 0.0;
};

struct JointReport {
  std::string latent;
  std::string target_label;
  std::vector<double> sizes;
  std::vector<int> target_states;  // empty when nothing was merged
  std::optional<double> merged_size;
  std::vector<JointRow> rows;
  std::size_t cut = 0;
  bool exact = true;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Per-state occurrence, the merged column when `target_states` is nonempty,
/// MI and CIC for every observed variable, in CIC order.
JointReport build_joint_report(const LatentTreeModel& model, std::string_view latent,
                               std::span<const int> target_states, const std::string& target_label = {},
                               double smoothing = kDefaultSmoothing, std::uint64_t seed = 0,
                               std::size_t samples = kCicSamples);

std::string format_joint_tsv(const JointReport& report);
JointReport parse_joint_tsv(const std::string& text);

}  // namespace ltm
