#pragma once

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltm/model.hpp"

namespace ltm {

// Observed variable name -> state. Unmentioned variables, and entries equal
// to kMissing, are marginalized.
using Evidence = std::map<std::string, int>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Two-pass message passing on one model, reusing its buffers across calls.
///
/// Messages are rescaled at every node and the log normalizers accumulated,
/// so the likelihood of long records over many leaves does not underflow.
/// Evidence is a per-node state vector; unlike the public Evidence API it may
/// also clamp latent nodes, which marginal() relies on.
class TreePropagator {
 public:
  explicit TreePropagator(const LatentTreeModel& model);

  // Runs the upward pass, and the downward pass when `posteriors` is set.
  // Returns ln P(evidence); kNegInf when the evidence has probability zero,
  // in which case posteriors are unavailable.
  double propagate(std::span<const int> states, bool posteriors = true);

  // Valid after a propagate() with posteriors that returned a finite value.
  std::span<const double> node_posterior(NodeId v) const;
  // P(parent(child), child | evidence), parent-state major.
  void edge_posterior(NodeId child, std::span<double> out) const;

  const LatentTreeModel& model() const { return *model_; }

 private:
  const LatentTreeModel* model_;
  std::vector<std::size_t> offset_;      // per-node offset into node-sized buffers
  std::vector<std::size_t> up_offset_;   // per-node offset into parent-sized buffers
  std::vector<double> lambda_;           // evidence from below, node-sized
  std::vector<double> outside_;          // evidence from above, node-sized
  std::vector<double> belief_;
  std::vector<double> up_;               // message child -> parent, parent-sized
  std::vector<double> down_;             // parent-side factor for the child, parent-sized
  std::vector<double> scratch_;
  std::vector<int> states_;
  bool have_posteriors_ = false;
};

// ln P(evidence).
double record_loglik(const LatentTreeModel& model, const Evidence& evidence);

// P(latent | evidence).
std::vector<double> posterior(const LatentTreeModel& model, const Evidence& evidence,
                              std::string_view latent);

// P(first, second | evidence) for an edge, first-state major.
std::vector<double> edge_posterior(const LatentTreeModel& model, const Evidence& evidence,
                                   std::string_view first, std::string_view second);

// Sum over records of weight * ln P(record).
double dataset_loglik(const LatentTreeModel& model, const DataSet& data);

// Converts named evidence to a per-node state vector, rejecting unknown
// names, latent variables and out-of-range states.
std::vector<int> evidence_states(const LatentTreeModel& model, const Evidence& evidence);

/// Maps dataset columns onto model nodes. Columns whose variable is not in
/// the model are an error unless allow_extra is set, in which case they are
/// skipped. Values are range-checked against the model's cardinalities.
class DataBinding {
 public:
  DataBinding(const LatentTreeModel& model, const DataSet& data, bool allow_extra = false);

  // Writes record r into a node-indexed state vector (latent nodes missing).
  void fill(std::size_t record, std::span<int> states) const;
  const std::vector<NodeId>& nodes() const { return nodes_; }

 private:
  const DataSet* data_;
  std::size_t model_size_;
  std::vector<NodeId> nodes_;  // per column; kNoNode when skipped
};

}  // namespace ltm
