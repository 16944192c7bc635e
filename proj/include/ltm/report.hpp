#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ltm/model.hpp"

namespace ltm {

inline const double kNaturalBase = std::exp(1.0);

// Cluster sizes P(Y=s) and presence probabilities P(X != 0 | Y=s).
// For binary symptoms presence is state 1.
struct OccurrenceTable {
  std::string latent;
  std::vector<double> sizes;
  std::vector<std::string> symptoms;
  std::vector<std::vector<double>> presence;  // [symptom][state]
};

OccurrenceTable occurrence_table(const LatentTreeModel& model, std::string_view latent,
                                 std::span<const std::string> symptoms);

// I(A;B) under the model joint, in units of the given log base (nats by default).
double mutual_info(const LatentTreeModel& model, std::string_view a, std::string_view b,
                   double log_base = kNaturalBase);

enum class PatternKind { CoOccurrence, MutualExclusion, Mixed };
const char* to_string(PatternKind kind);

struct Pattern {
  PatternKind kind = PatternKind::CoOccurrence;
  // CoOccurrence: every symptom in group_a. MutualExclusion: two groups whose
  // members correlate negatively across groups and nonnegatively within.
  // Mixed: the groups are a best-effort split and `conflict` names three
  // symptoms whose correlation signs cannot be 2-colored.
  std::vector<std::string> group_a;
  std::vector<std::string> group_b;
  std::array<std::string, 3> conflict;
};

// Correlations with |rho| below this count as zero.
inline constexpr double kZeroCorrelation = 1e-6;

// Pearson correlation of the presence indicators of two observed variables.
double presence_correlation(const LatentTreeModel& model, std::string_view a, std::string_view b);

// Classifies the symptoms adjacent to `latent` by the signs of their
// pairwise presence correlations.
Pattern pattern_type(const LatentTreeModel& model, std::string_view latent);

struct PartitionRow {
  std::string symptom;
  std::vector<double> presence;
  double mi = 0.0;
};

struct PartitionReport {
  std::string latent;
  std::vector<double> sizes;
  std::vector<PartitionRow> rows;  // MI descending, ties by name
  Pattern pattern;
  double log_base = kNaturalBase;
};

PartitionReport build_report(const LatentTreeModel& model, std::string_view latent,
                             double log_base = kNaturalBase);

struct EdgeStrength {
  std::string a;
  std::string b;
  double mi = 0.0;
};
// MI between every pair of neighbors, in edge order.
std::vector<EdgeStrength> edge_strengths(const LatentTreeModel& model, double log_base = kNaturalBase);

std::string unit_name(double log_base);

// TSV: header "cluster<TAB>Y=s0...<TAB>MI", a "size" row, then one row per
// symptom, then "#pattern" and "#unit" rows.
std::string format_report_tsv(const PartitionReport& report);
std::string format_report_text(const PartitionReport& report);
PartitionReport parse_report_tsv(const std::string& text);

}  // namespace ltm
