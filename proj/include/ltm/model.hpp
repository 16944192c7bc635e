#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ltm {

enum class VariableKind { Observed, Latent };

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::Observed;
  int cardinality = 2;

  bool latent() const { return kind == VariableKind::Latent; }
  bool operator==(const Variable&) const = default;
};

using NodeId = int;
inline constexpr NodeId kNoNode = -1;
inline constexpr int kMissing = -1;

struct Edge {
  NodeId a = kNoNode;
  NodeId b = kNoNode;
};

/// Undirected tree over categorical variables with a rooted CPT
/// parameterization. cpt(v) is P(v | parent(v)) stored row-major, one row per
/// parent state; the root stores its marginal as a single row.
///
/// Construction never throws on invariant violations other than
/// out-of-range node ids: a malformed model is representable so that
/// validate() can describe what is wrong with it. Operations that need a
/// well-formed model call require_valid().
class LatentTreeModel {
 public:
  LatentTreeModel() = default;
  LatentTreeModel(std::vector<Variable> variables, std::vector<Edge> edges, NodeId root,
                  std::vector<std::vector<double>> cpts);

  std::size_t size() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(NodeId v) const { return variables_[static_cast<std::size_t>(v)]; }
  const std::string& name(NodeId v) const { return variable(v).name; }
  int cardinality(NodeId v) const { return variable(v).cardinality; }
  bool is_latent(NodeId v) const { return variable(v).latent(); }

  const std::vector<Edge>& edges() const { return edges_; }
  NodeId root() const { return root_; }
  NodeId parent(NodeId v) const { return parent_[static_cast<std::size_t>(v)]; }
  std::span<const NodeId> children(NodeId v) const { return children_[static_cast<std::size_t>(v)]; }
  std::span<const NodeId> neighbors(NodeId v) const { return neighbors_[static_cast<std::size_t>(v)]; }
  std::size_t degree(NodeId v) const { return neighbors(v).size(); }
  bool adjacent(NodeId a, NodeId b) const;

  // Root first; every node precedes its children. Only reachable nodes.
  const std::vector<NodeId>& preorder() const { return preorder_; }

  const std::vector<std::vector<double>>& cpts() const { return cpts_; }
  std::span<const double> cpt(NodeId v) const { return cpts_[static_cast<std::size_t>(v)]; }
  // P(v = state | parent = parent_state); parent_state is ignored for the root.
  double prob(NodeId v, int parent_state, int state) const;

  std::optional<NodeId> find(std::string_view name) const;
  // Throws a data error naming the variable when absent.
  NodeId index(std::string_view name) const;

  std::vector<NodeId> observed() const;
  std::vector<NodeId> latents() const;

  LatentTreeModel with_cpts(std::vector<std::vector<double>> cpts) const;

  // Structural and numerical invariant violations, computed at construction.
  const std::vector<std::string>& violations() const { return violations_; }
  bool valid() const { return violations_.empty(); }

 private:
  void build();

  std::vector<Variable> variables_;
  std::vector<Edge> edges_;
  NodeId root_ = kNoNode;
  std::vector<std::vector<double>> cpts_;

  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::vector<NodeId>> neighbors_;
  std::vector<NodeId> preorder_;
  std::unordered_map<std::string, NodeId> by_name_;
  std::vector<std::string> violations_;
};

/// Weighted records of categorical values; kMissing marks a missing cell.
class DataSet {
 public:
  DataSet() = default;
  // cardinalities may be empty, in which case each column gets
  // max(2, largest observed state + 1).
  DataSet(std::vector<std::string> names, std::vector<int> values, std::vector<double> weights,
          std::vector<int> cardinalities = {});

  std::size_t num_records() const { return weights_.size(); }
  std::size_t num_variables() const { return names_.size(); }
  bool empty() const { return weights_.empty(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }
  std::optional<std::size_t> column(std::string_view name) const;

  int value(std::size_t record, std::size_t col) const { return values_[record * names_.size() + col]; }
  std::span<const int> row(std::size_t record) const {
    return {values_.data() + record * names_.size(), names_.size()};
  }
  double weight(std::size_t record) const { return weights_[record]; }
  const std::vector<double>& weights() const { return weights_; }
  double total_weight() const { return total_weight_; }

  // Keeps only the named columns, in the given order.
  DataSet project(std::span<const std::string> names) const;
  // Collapses identical rows into one weighted row; first occurrence order.
  DataSet dedupe() const;
  DataSet scaled(double factor) const;

 private:
  std::vector<std::string> names_;
  std::vector<int> cardinalities_;
  std::vector<int> values_;
  std::vector<double> weights_;
  double total_weight_ = 0.0;
};

// Empty iff all invariants hold. Each entry names the node, edge or table at fault.
std::vector<std::string> validate(const LatentTreeModel& model);
// Throws a data error listing the violations.
void require_valid(const LatentTreeModel& model);

// Number of free parameters: (|root|-1) + sum over other nodes of (|v|-1)*|parent(v)|.
long dimension(const LatentTreeModel& model);

LatentTreeModel reroot(const LatentTreeModel& model, std::string_view new_root);

// Per-node marginals by a top-down sweep; indexed by node id.
std::vector<std::vector<double>> node_marginals(const LatentTreeModel& model);

struct JointTable {
  std::vector<std::string> variables;
  std::vector<int> cardinalities;
  // Row-major with the last variable varying fastest.
  std::vector<double> values;
};

inline constexpr std::size_t kMaxMarginalStates = std::size_t{1} << 20;

// Exact joint over a subset of (observed or latent) variables.
JointTable marginal(const LatentTreeModel& model, std::span<const std::string> subset);

// Draws n complete records root-first. Latent columns are dropped unless
// include_latent is set.
DataSet forward_sample(const LatentTreeModel& model, std::size_t n, std::uint64_t seed,
                       bool include_latent = false);

// The first cycle found among the edges, as a closed node sequence; empty if acyclic.
std::vector<NodeId> find_cycle(std::size_t num_nodes, std::span<const Edge> edges);

// Builds a model from names; cpts are keyed by node name.
struct NamedCpt {
  std::string node;
  std::vector<double> table;
};
LatentTreeModel make_model(std::vector<Variable> variables,
                           std::span<const std::pair<std::string, std::string>> edges,
                           std::string_view root, std::span<const NamedCpt> cpts);

// A latent class model: one latent root with every observed variable as a child.
// CPTs are uniform placeholders.
LatentTreeModel make_lcm_skeleton(std::string latent_name, int latent_cardinality,
                                  std::span<const Variable> observed);

}  // namespace ltm
