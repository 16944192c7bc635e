#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltm/inference.hpp"
#include "ltm/joint.hpp"
#include "ltm/model.hpp"

namespace ltm {

struct RuleEntry {
  std::string symptom;
  double score = 0.0;
};

/// Score-based rule: classify into the target class when the scores of the
/// present symptoms add up to more than the threshold.
struct ClassificationRule {
  std::vector<RuleEntry> entries;
  double threshold = 0.0;
  double smoothing = kDefaultSmoothing;
  double base = 2.0;
  std::optional<double> scale;  // set on integerized rules
  std::string latent;
  std::string target_label;
  std::vector<int> target_states;
  std::string ordering = "contribution";
  std::string model_id;
};

// log2 odds ratio of presence between target and complement.
double presence_score(double p_target, double p_complement);
// log2 of P(X=0 | target) / P(X=0 | complement); what a symptom adds to the
// threshold's sum when it is kept in the rule.
double absence_term(double p_target, double p_complement);

/// Scores and threshold from a class summary. Entries are ordered by
/// score * P(X present), descending, then by MI with the latent, then by name.
ClassificationRule derive_rule(const ClassSummary& summary);

struct RuleDecision {
  bool target = false;
  double total = 0.0;
};

// Missing and unmentioned symptoms count as absent.
RuleDecision apply_rule(const ClassificationRule& rule, const Evidence& record);

/// Rule decisions for every record. Rule symptoms without a dataset column
/// count as absent and are reported in `warnings`.
std::vector<RuleDecision> classify_records(const ClassificationRule& rule, const DataSet& data,
                                           std::vector<std::string>* warnings = nullptr, int threads = 1);

// Target iff the posterior mass of the target states exceeds the rest.
bool model_classify(const LatentTreeModel& model, std::string_view latent, std::span<const int> target_states,
                    const Evidence& record);

struct ModelDecision {
  bool target = false;
  double p_target = 0.0;
};

std::vector<ModelDecision> model_decisions(const LatentTreeModel& model, std::string_view latent,
                                           std::span<const int> target_states, const DataSet& data,
                                           int threads = 1);

// Weighted fraction of records where the rule agrees with the model.
double rule_accuracy(const ClassificationRule& rule, const LatentTreeModel& model, std::string_view latent,
                     std::span<const int> target_states, const DataSet& data, int threads = 1);

struct SweepRow {
  std::size_t kept = 0;  // the rule keeps entries [0, kept)
  std::string symptom;   // entry kept-1, the next one a further cut would remove
  double score = 0.0;
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct SimplificationSweep {
  std::vector<SweepRow> rows;  // kept = 1..n, in rule order
  double baseline = 0.0;       // accuracy of the full rule
};

/// Accuracy of every prefix of the rule. A prefix keeps the rule's scores and
/// drops the absence terms of the removed symptoms from the threshold.
SimplificationSweep simplify_sweep(const ClassificationRule& rule, const ClassSummary& summary,
                                   const LatentTreeModel& model, const DataSet& data, int threads = 1);

// Scores and threshold multiplied by `scale` and rounded to integers.
ClassificationRule integerize(const ClassificationRule& rule, double scale);

// Weighted fraction of records on which two rules decide alike.
double decision_agreement(const ClassificationRule& a, const ClassificationRule& b, const DataSet& data);

std::string format_rule_tsv(const ClassificationRule& rule);
ClassificationRule parse_rule_tsv(const std::string& text);

std::string format_sweep_tsv(const SimplificationSweep& sweep);
SimplificationSweep parse_sweep_tsv(const std::string& text);

}  // namespace ltm
