#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltm/em.hpp"
#include "ltm/model.hpp"

namespace ltm {

enum class Phase { Expansion, Adjustment, Simplification };

enum class OperatorKind { StateIntroduction, NodeIntroduction, NodeRelocation, StateDeletion, NodeDeletion };

const char* to_string(Phase phase);
const char* to_string(OperatorKind kind);

/// One structural edit.
///   StateIntroduction / StateDeletion: `latent` gains / loses a state.
///   NodeIntroduction: a new binary latent `created` is inserted between
///     `latent` and its neighbors `first`, `second`.
///   NodeRelocation: neighbor `first` of `latent` moves to the adjacent latent `destination`.
///   NodeDeletion: `latent` is removed and its other neighbors attach to `destination`.
struct SearchOperator {
  OperatorKind kind = OperatorKind::StateIntroduction;
  std::string latent;
  std::string first;
  std::string second;
  std::string destination;
  std::string created;

  std::string describe() const;
  bool operator==(const SearchOperator&) const = default;
};

struct SearchConfig {
  EmConfig em;
  // Local EM iterations used to screen each candidate.
  int screening_iterations = 20;
  int max_latent_cardinality = 10;
  // 0 means the number of observed variables.
  int max_latent_count = 0;
  std::uint64_t seed = 0;
  // Cardinalities tried for the initial latent class model.
  int initial_max_cardinality = 4;

  void check() const;
};

struct SearchStep {
  Phase phase = Phase::Expansion;
  SearchOperator op;
  double bic_before = 0.0;
  double bic_after = 0.0;
};

struct SearchResult {
  FitResult fit;
  double initial_bic = 0.0;
  std::vector<SearchStep> steps;
  std::vector<std::string> warnings;
};

/// Candidate edits for one phase in a deterministic order (by operator kind,
/// then by the names involved). New latents are named Y01, Y02, ... using
/// the first number above every existing Y-name.
std::vector<SearchOperator> enumerate_candidates(const LatentTreeModel& model, Phase phase,
                                                 const SearchConfig& config);

struct Candidate {
  LatentTreeModel model;
  // Nodes whose CPTs changed meaning under the edit; screened by local EM.
  std::vector<char> free_nodes;
};

/// Applies an edit. Parameters the edit leaves meaningful are carried over
/// (conditionals between surviving variables come from the old joint); new
/// ones are drawn from `rng`.
Candidate apply_operator(const LatentTreeModel& model, const SearchOperator& op, Rng& rng);

/// Greedy BIC search cycling expansion, adjustment and simplification
/// until a full cycle brings no improvement. Starts from the best latent
/// class model over cardinalities 1..initial_max_cardinality.
SearchResult search(const DataSet& data, const SearchConfig& config);

// One line per accepted move.
std::string format_search_log(const SearchResult& result);

}  // namespace ltm
