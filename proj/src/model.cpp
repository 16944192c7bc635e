#include "ltm/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "ltm/random.hpp"

namespace ltm {

namespace {

constexpr double kNormTolerance = 1e-9;

std::string edge_label(const LatentTreeModel& m, const Edge& e) {
  return m.name(e.a) + " - " + m.name(e.b);
}

}  // namespace

LatentTreeModel::LatentTreeModel(std::vector<Variable> variables, std::vector<Edge> edges,
                                 NodeId root, std::vector<std::vector<double>> cpts)
    : variables_(std::move(variables)), edges_(std::move(edges)), root_(root), cpts_(std::move(cpts)) {
  const auto n = static_cast<NodeId>(variables_.size());
  for (const auto& e : edges_) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) data_error("edge refers to an unknown node id");
  }
  if (root_ < 0 || root_ >= n) data_error("root refers to an unknown node id");
  cpts_.resize(variables_.size());
  build();
}

void LatentTreeModel::build() {
  const std::size_t n = variables_.size();
  parent_.assign(n, kNoNode);
  children_.assign(n, {});
  neighbors_.assign(n, {});
  preorder_.clear();
  by_name_.clear();
  violations_.clear();

  for (std::size_t v = 0; v < n; ++v) {
    const auto& var = variables_[v];
    if (var.name.empty()) violations_.push_back("variable #" + std::to_string(v) + " has an empty name");
    if (!by_name_.emplace(var.name, static_cast<NodeId>(v)).second)
      violations_.push_back("variable '" + var.name + "' is declared more than once");
    if (!var.latent() && var.cardinality < 2)
      violations_.push_back("observed variable '" + var.name + "' has cardinality " +
                            std::to_string(var.cardinality) + " (< 2)");
    if (var.latent() && var.cardinality < 1)
      violations_.push_back("latent variable '" + var.name + "' has cardinality " +
                            std::to_string(var.cardinality) + " (< 1)");
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& e : edges_) {
    if (e.a == e.b) {
      violations_.push_back("edge " + edge_label(*this, e) + " is a self loop");
      continue;
    }
    auto key = std::minmax(e.a, e.b);
    if (!seen.insert(key).second) {
      violations_.push_back("edge " + edge_label(*this, e) + " is listed more than once");
      continue;
    }
    neighbors_[static_cast<std::size_t>(e.a)].push_back(e.b);
    neighbors_[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  if (!variables_[static_cast<std::size_t>(root_)].latent())
    violations_.push_back("root '" + name(root_) + "' is not a latent variable");
  if (edges_.size() + 1 != n)
    violations_.push_back("model has " + std::to_string(edges_.size()) + " edges but " +
                          std::to_string(n) + " variables; a tree needs " + std::to_string(n - 1));
  if (auto cycle = find_cycle(n, edges_); !cycle.empty()) {
    std::string path;
    for (NodeId v : cycle) path += (path.empty() ? "" : " - ") + name(v);
    violations_.push_back("edges contain a cycle: " + path);
  }

  // Orient away from the root.
  std::vector<char> visited(n, 0);
  std::queue<NodeId> frontier;
  frontier.push(root_);
  visited[static_cast<std::size_t>(root_)] = 1;
  while (!frontier.empty()) {
    NodeId v = frontier.front();
    frontier.pop();
    preorder_.push_back(v);
    for (NodeId w : neighbors(v)) {
      if (visited[static_cast<std::size_t>(w)]) continue;
      visited[static_cast<std::size_t>(w)] = 1;
      parent_[static_cast<std::size_t>(w)] = v;
      children_[static_cast<std::size_t>(v)].push_back(w);
      frontier.push(w);
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (!visited[v]) violations_.push_back("variable '" + variables_[v].name + "' is not connected to the root");

  for (std::size_t v = 0; v < n; ++v) {
    const auto& var = variables_[v];
    const std::size_t deg = neighbors_[v].size();
    if (!var.latent() && deg != 1)
      violations_.push_back("observed variable '" + var.name + "' has degree " + std::to_string(deg) +
                            " (must be a leaf)");
    if (var.latent() && deg < 2 && n > 1)
      violations_.push_back("latent variable '" + var.name + "' has degree " + std::to_string(deg) +
                            " (must be internal)");
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (!visited[v]) continue;
    const auto& var = variables_[v];
    const NodeId p = parent_[v];
    const int rows = p == kNoNode ? 1 : cardinality(p);
    const auto& table = cpts_[v];
    const std::string what = p == kNoNode ? "P(" + var.name + ")" : "P(" + var.name + " | " + name(p) + ")";
    if (var.cardinality < 1 || rows < 1) continue;
    if (table.size() != static_cast<std::size_t>(rows * var.cardinality)) {
      violations_.push_back("table " + what + " has " + std::to_string(table.size()) + " entries, expected " +
                            std::to_string(rows * var.cardinality));
      continue;
    }
    for (int r = 0; r < rows; ++r) {
      double sum = 0.0;
      bool bad = false;
      for (int s = 0; s < var.cardinality; ++s) {
        double x = table[static_cast<std::size_t>(r * var.cardinality + s)];
        if (!std::isfinite(x) || x < 0.0) bad = true;
        sum += x;
      }
      std::string column = p == kNoNode ? what : what + " column " + name(p) + "=" + std::to_string(r);
      if (bad) violations_.push_back("table " + column + " has a negative or non-finite entry");
      else if (std::fabs(sum - 1.0) > kNormTolerance) {
        std::ostringstream os;
        os << "table " << column << " sums to " << sum;
        violations_.push_back(os.str());
      }
    }
  }
}

bool LatentTreeModel::adjacent(NodeId a, NodeId b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

double LatentTreeModel::prob(NodeId v, int parent_state, int state) const {
  const NodeId p = parent(v);
  const std::size_t row = p == kNoNode ? 0 : static_cast<std::size_t>(parent_state);
  return cpts_[static_cast<std::size_t>(v)][row * static_cast<std::size_t>(cardinality(v)) +
                                             static_cast<std::size_t>(state)];
}

std::optional<NodeId> LatentTreeModel::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

NodeId LatentTreeModel::index(std::string_view name) const {
  auto v = find(name);
  if (!v) data_error("unknown variable '" + std::string(name) + "'");
  return *v;
}

std::vector<NodeId> LatentTreeModel::observed() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < size(); ++v)
    if (!variables_[v].latent()) out.push_back(static_cast<NodeId>(v));
  return out;
}

std::vector<NodeId> LatentTreeModel::latents() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < size(); ++v)
    if (variables_[v].latent()) out.push_back(static_cast<NodeId>(v));
  return out;
}

LatentTreeModel LatentTreeModel::with_cpts(std::vector<std::vector<double>> cpts) const {
  return LatentTreeModel(variables_, edges_, root_, std::move(cpts));
}

std::vector<std::string> validate(const LatentTreeModel& model) { return model.violations(); }

void require_valid(const LatentTreeModel& model) {
  if (model.size() == 0) data_error("invalid model: no variables");
  if (model.valid()) return;
  std::string msg = "invalid model:";
  for (const auto& v : model.violations()) msg += "\n  " + v;
  data_error(msg);
}

long dimension(const LatentTreeModel& model) {
  require_valid(model);
  long d = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto v = static_cast<NodeId>(i);
    const long k = model.cardinality(v);
    const NodeId p = model.parent(v);
    d += (k - 1) * (p == kNoNode ? 1L : static_cast<long>(model.cardinality(p)));
  }
  return d;
}

std::vector<std::vector<double>> node_marginals(const LatentTreeModel& model) {
  std::vector<std::vector<double>> marg(model.size());
  for (NodeId v : model.preorder()) {
    const int k = model.cardinality(v);
    auto& out = marg[static_cast<std::size_t>(v)];
    out.assign(static_cast<std::size_t>(k), 0.0);
    const NodeId p = model.parent(v);
    if (p == kNoNode) {
      for (int s = 0; s < k; ++s) out[static_cast<std::size_t>(s)] = model.prob(v, 0, s);
      continue;
    }
    const auto& pm = marg[static_cast<std::size_t>(p)];
    for (int ps = 0; ps < model.cardinality(p); ++ps)
      for (int s = 0; s < k; ++s) out[static_cast<std::size_t>(s)] += pm[static_cast<std::size_t>(ps)] * model.prob(v, ps, s);
  }
  return marg;
}

LatentTreeModel reroot(const LatentTreeModel& model, std::string_view new_root) {
  require_valid(model);
  const NodeId r = model.index(new_root);
  if (!model.is_latent(r)) data_error("cannot root at observed variable '" + std::string(new_root) + "'");
  if (r == model.root()) return model;

  const auto marg = node_marginals(model);
  LatentTreeModel shell(model.variables(), model.edges(), r, {});
  std::vector<std::vector<double>> cpts(model.size());
  for (NodeId v : shell.preorder()) {
    const NodeId p = shell.parent(v);
    const auto k = static_cast<std::size_t>(model.cardinality(v));
    auto& table = cpts[static_cast<std::size_t>(v)];
    if (p == kNoNode) {
      table = marg[static_cast<std::size_t>(v)];
      continue;
    }
    if (model.parent(v) == p) {
      table.assign(model.cpt(v).begin(), model.cpt(v).end());
      continue;
    }
    // Edge reversed: P(v | p) = P(p | v) P(v) / P(p).
    const auto kp = static_cast<std::size_t>(model.cardinality(p));
    table.assign(kp * k, 0.0);
    const auto& mv = marg[static_cast<std::size_t>(v)];
    const auto& mp = marg[static_cast<std::size_t>(p)];
    for (std::size_t ps = 0; ps < kp; ++ps) {
      if (mp[ps] <= 0.0) {
        for (std::size_t s = 0; s < k; ++s) table[ps * k + s] = 1.0 / static_cast<double>(k);
        continue;
      }
      double sum = 0.0;
      for (std::size_t s = 0; s < k; ++s) {
        double x = model.prob(p, static_cast<int>(s), static_cast<int>(ps)) * mv[s];
        table[ps * k + s] = x;
        sum += x;
      }
      for (std::size_t s = 0; s < k; ++s) table[ps * k + s] /= sum;
    }
  }
  return shell.with_cpts(std::move(cpts));
}

JointTable marginal(const LatentTreeModel& model, std::span<const std::string> subset) {
  require_valid(model);
  JointTable out;
  std::vector<NodeId> nodes;
  std::size_t total = 1;
  for (const auto& name : subset) {
    NodeId v = model.index(name);
    if (std::find(nodes.begin(), nodes.end(), v) != nodes.end())
      data_error("variable '" + name + "' appears twice in the marginal subset");
    nodes.push_back(v);
    out.variables.push_back(name);
    out.cardinalities.push_back(model.cardinality(v));
    total *= static_cast<std::size_t>(model.cardinality(v));
    if (total > kMaxMarginalStates) data_error("marginal subset is too large (more than 2^20 joint states)");
  }
  out.values.assign(total, 0.0);

  TreePropagator prop(model);
  std::vector<int> states(model.size(), kMissing);
  std::vector<int> assign(nodes.size(), 0);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) states[static_cast<std::size_t>(nodes[j])] = assign[j];
    double ll = prop.propagate(states, false);
    out.values[i] = ll == kNegInf ? 0.0 : std::exp(ll);
    for (std::size_t j = nodes.size(); j-- > 0;) {
      if (++assign[j] < out.cardinalities[j]) break;
      assign[j] = 0;
    }
  }
  return out;
}

DataSet forward_sample(const LatentTreeModel& model, std::size_t n, std::uint64_t seed, bool include_latent) {
  require_valid(model);
  std::vector<NodeId> columns;
  std::vector<std::string> names;
  std::vector<int> cards;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto v = static_cast<NodeId>(i);
    if (!include_latent && model.is_latent(v)) continue;
    columns.push_back(v);
    names.push_back(model.name(v));
    cards.push_back(model.cardinality(v));
  }

  std::vector<int> values(n * columns.size());
  std::vector<int> states(model.size());
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng(substream(seed, stream::kSample, r));
    for (NodeId v : model.preorder()) {
      const NodeId p = model.parent(v);
      const auto k = static_cast<std::size_t>(model.cardinality(v));
      const std::size_t row = p == kNoNode ? 0 : static_cast<std::size_t>(states[static_cast<std::size_t>(p)]);
      states[static_cast<std::size_t>(v)] = rng.categorical(model.cpt(v).subspan(row * k, k));
    }
    for (std::size_t c = 0; c < columns.size(); ++c)
      values[r * columns.size() + c] = states[static_cast<std::size_t>(columns[c])];
  }
  return DataSet(std::move(names), std::move(values), std::vector<double>(n, 1.0), std::move(cards));
}

std::vector<NodeId> find_cycle(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<std::vector<std::pair<NodeId, std::size_t>>> adj(num_nodes);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.a < 0 || e.b < 0 || static_cast<std::size_t>(e.a) >= num_nodes || static_cast<std::size_t>(e.b) >= num_nodes)
      continue;
    if (e.a == e.b) return {e.a, e.a};
    adj[static_cast<std::size_t>(e.a)].emplace_back(e.b, i);
    adj[static_cast<std::size_t>(e.b)].emplace_back(e.a, i);
  }
  std::vector<int> state(num_nodes, 0);  // 0 new, 1 on stack, 2 done
  std::vector<NodeId> parent(num_nodes, kNoNode);
  std::vector<std::size_t> via(num_nodes, edges.size());

  for (std::size_t start = 0; start < num_nodes; ++start) {
    if (state[start]) continue;
    std::vector<std::pair<NodeId, std::size_t>> stack{{static_cast<NodeId>(start), 0}};
    state[start] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto& nb = adj[static_cast<std::size_t>(v)];
      if (next == nb.size()) {
        state[static_cast<std::size_t>(v)] = 2;
        stack.pop_back();
        continue;
      }
      auto [w, eid] = nb[next++];
      if (eid == via[static_cast<std::size_t>(v)]) continue;
      if (state[static_cast<std::size_t>(w)] == 1) {
        std::vector<NodeId> cycle{w};
        for (NodeId x = v; x != w; x = parent[static_cast<std::size_t>(x)]) cycle.push_back(x);
        cycle.push_back(w);
        std::reverse(cycle.begin() + 1, cycle.end() - 1);
        return cycle;
      }
      if (state[static_cast<std::size_t>(w)] == 0) {
        state[static_cast<std::size_t>(w)] = 1;
        parent[static_cast<std::size_t>(w)] = v;
        via[static_cast<std::size_t>(w)] = eid;
        stack.emplace_back(w, 0);
      }
    }
  }
  return {};
}

LatentTreeModel make_model(std::vector<Variable> variables,
                           std::span<const std::pair<std::string, std::string>> edges, std::string_view root,
                           std::span<const NamedCpt> cpts) {
  std::map<std::string, NodeId, std::less<>> ids;
  for (std::size_t i = 0; i < variables.size(); ++i) ids.emplace(variables[i].name, static_cast<NodeId>(i));
  auto lookup = [&](std::string_view name) {
    auto it = ids.find(name);
    if (it == ids.end()) data_error("unknown variable '" + std::string(name) + "'");
    return it->second;
  };
  std::vector<Edge> edge_ids;
  for (const auto& [a, b] : edges) edge_ids.push_back({lookup(a), lookup(b)});
  std::vector<std::vector<double>> tables(variables.size());
  for (const auto& c : cpts) tables[static_cast<std::size_t>(lookup(c.node))] = c.table;
  NodeId r = lookup(root);
  return LatentTreeModel(std::move(variables), std::move(edge_ids), r, std::move(tables));
}

LatentTreeModel make_lcm_skeleton(std::string latent_name, int latent_cardinality,
                                  std::span<const Variable> observed) {
  std::vector<Variable> vars;
  vars.push_back({std::move(latent_name), VariableKind::Latent, latent_cardinality});
  std::vector<Edge> edges;
  std::vector<std::vector<double>> cpts;
  const auto k = static_cast<std::size_t>(std::max(latent_cardinality, 1));
  cpts.emplace_back(k, 1.0 / static_cast<double>(k));
  for (const auto& o : observed) {
    vars.push_back(o);
    edges.push_back({0, static_cast<NodeId>(vars.size() - 1)});
    const auto c = static_cast<std::size_t>(o.cardinality);
    cpts.emplace_back(k * c, 1.0 / static_cast<double>(c));
  }
  return LatentTreeModel(std::move(vars), std::move(edges), 0, std::move(cpts));
}

// ---------------------------------------------------------------------------
// DataSet

DataSet::DataSet(std::vector<std::string> names, std::vector<int> values, std::vector<double> weights,
                 std::vector<int> cardinalities)
    : names_(std::move(names)),
      cardinalities_(std::move(cardinalities)),
      values_(std::move(values)),
      weights_(std::move(weights)) {
  const std::size_t cols = names_.size();
  if (values_.size() != cols * weights_.size()) data_error("dataset value count does not match its shape");
  std::set<std::string> unique;
  for (const auto& n : names_) {
    if (n.empty()) data_error("dataset has an empty variable name");
    if (!unique.insert(n).second) data_error("dataset variable '" + n + "' appears more than once");
  }
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) data_error("record weights must be positive and finite");
    total_weight_ += w;
  }
  for (int v : values_)
    if (v < kMissing) data_error("dataset contains a negative state index");
  if (cardinalities_.empty()) {
    cardinalities_.assign(cols, 2);
    for (std::size_t i = 0; i < values_.size(); ++i)
      cardinalities_[i % cols] = std::max(cardinalities_[i % cols], values_[i] + 1);
  } else {
    if (cardinalities_.size() != cols) data_error("dataset cardinality count does not match its columns");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i] >= cardinalities_[i % cols])
        data_error("value " + std::to_string(values_[i]) + " of '" + names_[i % cols] +
                   "' exceeds its cardinality " + std::to_string(cardinalities_[i % cols]));
  }
}

std::optional<std::size_t> DataSet::column(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

DataSet DataSet::project(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  std::vector<int> cards;
  for (const auto& n : names) {
    auto c = column(n);
    if (!c) data_error("dataset has no variable '" + n + "'");
    cols.push_back(*c);
    cards.push_back(cardinalities_[*c]);
  }
  std::vector<int> values;
  values.reserve(num_records() * cols.size());
  for (std::size_t r = 0; r < num_records(); ++r)
    for (auto c : cols) values.push_back(value(r, c));
  return DataSet({names.begin(), names.end()}, std::move(values), weights_, std::move(cards));
}

DataSet DataSet::dedupe() const {
  std::map<std::vector<int>, std::size_t> index;
  std::vector<int> values;
  std::vector<double> weights;
  for (std::size_t r = 0; r < num_records(); ++r) {
    auto row_span = row(r);
    std::vector<int> key(row_span.begin(), row_span.end());
    auto [it, inserted] = index.emplace(std::move(key), weights.size());
    if (inserted) {
      values.insert(values.end(), row_span.begin(), row_span.end());
      weights.push_back(weights_[r]);
    } else {
      weights[it->second] += weights_[r];
    }
  }
  return DataSet(names_, std::move(values), std::move(weights), cardinalities_);
}

DataSet DataSet::scaled(double factor) const {
  std::vector<double> w(weights_);
  for (double& x : w) x *= factor;
  return DataSet(names_, values_, std::move(w), cardinalities_);
}

}  // namespace ltm
