#include "ltm/inference.hpp"

#include <algorithm>
#include <cmath>

#include "ltm/error.hpp"

namespace ltm {

TreePropagator::TreePropagator(const LatentTreeModel& model) : model_(&model) {
  require_valid(model);
  const std::size_t n = model.size();
  offset_.resize(n);
  up_offset_.resize(n);
  std::size_t node_total = 0;
  std::size_t up_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<NodeId>(i);
    offset_[i] = node_total;
    node_total += static_cast<std::size_t>(model.cardinality(v));
    up_offset_[i] = up_total;
    if (model.parent(v) != kNoNode) up_total += static_cast<std::size_t>(model.cardinality(model.parent(v)));
  }
  lambda_.assign(node_total, 0.0);
  outside_.assign(node_total, 0.0);
  belief_.assign(node_total, 0.0);
  up_.assign(up_total, 0.0);
  down_.assign(up_total, 0.0);
  states_.assign(n, kMissing);
}

double TreePropagator::propagate(std::span<const int> states, bool posteriors) {
  const auto& m = *model_;
  if (states.size() != m.size()) data_error("evidence vector does not match the model size");
  std::copy(states.begin(), states.end(), states_.begin());
  have_posteriors_ = false;
  const auto& order = m.preorder();
  double log_scale = 0.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    const auto vi = static_cast<std::size_t>(v);
    const auto k = static_cast<std::size_t>(m.cardinality(v));
    const int e = states_[vi];
    double* lam = lambda_.data() + offset_[vi];
    for (std::size_t s = 0; s < k; ++s) lam[s] = (e == kMissing || e == static_cast<int>(s)) ? 1.0 : 0.0;
    for (NodeId c : m.children(v)) {
      const double* u = up_.data() + up_offset_[static_cast<std::size_t>(c)];
      for (std::size_t s = 0; s < k; ++s) lam[s] *= u[s];
    }
    double mx = *std::max_element(lam, lam + k);
    if (!(mx > 0.0)) return kNegInf;
    if (mx != 1.0) {
      for (std::size_t s = 0; s < k; ++s) lam[s] /= mx;
      log_scale += std::log(mx);
    }

    const NodeId p = m.parent(v);
    if (p == kNoNode) continue;
    const auto kp = static_cast<std::size_t>(m.cardinality(p));
    double* u = up_.data() + up_offset_[vi];
    const double* cpt = m.cpt(v).data();
    if (e != kMissing && m.children(v).empty()) {
      for (std::size_t ps = 0; ps < kp; ++ps) u[ps] = cpt[ps * k + static_cast<std::size_t>(e)];
    } else {
      for (std::size_t ps = 0; ps < kp; ++ps) {
        double acc = 0.0;
        for (std::size_t s = 0; s < k; ++s) acc += cpt[ps * k + s] * lam[s];
        u[ps] = acc;
      }
    }
    mx = *std::max_element(u, u + kp);
    if (!(mx > 0.0)) return kNegInf;
    if (mx != 1.0) {
      for (std::size_t ps = 0; ps < kp; ++ps) u[ps] /= mx;
      log_scale += std::log(mx);
    }
  }

  const NodeId root = m.root();
  const auto ri = static_cast<std::size_t>(root);
  const auto kr = static_cast<std::size_t>(m.cardinality(root));
  const double* root_cpt = m.cpt(root).data();
  double z = 0.0;
  for (std::size_t s = 0; s < kr; ++s) z += root_cpt[s] * lambda_[offset_[ri] + s];
  if (!(z > 0.0)) return kNegInf;
  const double loglik = std::log(z) + log_scale;
  if (!posteriors) return loglik;

  std::copy(root_cpt, root_cpt + kr, outside_.begin() + static_cast<std::ptrdiff_t>(offset_[ri]));
  for (NodeId v : order) {
    const auto vi = static_cast<std::size_t>(v);
    const auto k = static_cast<std::size_t>(m.cardinality(v));
    const double* out = outside_.data() + offset_[vi];
    const double* lam = lambda_.data() + offset_[vi];
    double* bel = belief_.data() + offset_[vi];
    double sum = 0.0;
    for (std::size_t s = 0; s < k; ++s) sum += (bel[s] = out[s] * lam[s]);
    if (!(sum > 0.0)) return kNegInf;
    for (std::size_t s = 0; s < k; ++s) bel[s] /= sum;

    auto kids = m.children(v);
    if (kids.empty()) continue;
    const std::size_t nk = kids.size();
    // suffix[i] = product of up messages of children after i.
    scratch_.resize((nk + 1) * k);
    double* suffix = scratch_.data();
    double* prefix = scratch_.data() + nk * k;
    std::fill(suffix + (nk - 1) * k, suffix + nk * k, 1.0);
    for (std::size_t i = nk - 1; i-- > 0;) {
      const double* u = up_.data() + up_offset_[static_cast<std::size_t>(kids[i + 1])];
      for (std::size_t s = 0; s < k; ++s) suffix[i * k + s] = suffix[(i + 1) * k + s] * u[s];
    }
    const int e = states_[vi];
    for (std::size_t s = 0; s < k; ++s) prefix[s] = (e == kMissing || e == static_cast<int>(s)) ? out[s] : 0.0;

    for (std::size_t i = 0; i < nk; ++i) {
      const NodeId c = kids[i];
      const auto ci = static_cast<std::size_t>(c);
      double* down = down_.data() + up_offset_[ci];
      double mx = 0.0;
      for (std::size_t s = 0; s < k; ++s) mx = std::max(mx, down[s] = prefix[s] * suffix[i * k + s]);
      if (mx > 0.0)
        for (std::size_t s = 0; s < k; ++s) down[s] /= mx;
      const double* u = up_.data() + up_offset_[ci];
      for (std::size_t s = 0; s < k; ++s) prefix[s] *= u[s];
      mx = *std::max_element(prefix, prefix + k);
      if (mx > 0.0)
        for (std::size_t s = 0; s < k; ++s) prefix[s] /= mx;

      const auto kc = static_cast<std::size_t>(m.cardinality(c));
      const double* cpt = m.cpt(c).data();
      double* cout = outside_.data() + offset_[ci];
      double total = 0.0;
      for (std::size_t t = 0; t < kc; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < k; ++s) acc += down[s] * cpt[s * kc + t];
        cout[t] = acc;
        total += acc;
      }
      if (total > 0.0)
        for (std::size_t t = 0; t < kc; ++t) cout[t] /= total;
    }
  }
  have_posteriors_ = true;
  return loglik;
}

std::span<const double> TreePropagator::node_posterior(NodeId v) const {
  if (!have_posteriors_) numerical_error("posteriors are unavailable: evidence has probability zero");
  const auto vi = static_cast<std::size_t>(v);
  return {belief_.data() + offset_[vi], static_cast<std::size_t>(model_->cardinality(v))};
}

void TreePropagator::edge_posterior(NodeId child, std::span<double> out) const {
  if (!have_posteriors_) numerical_error("posteriors are unavailable: evidence has probability zero");
  const auto& m = *model_;
  const NodeId p = m.parent(child);
  const auto ci = static_cast<std::size_t>(child);
  const auto k = static_cast<std::size_t>(m.cardinality(child));
  const auto kp = static_cast<std::size_t>(m.cardinality(p));
  const double* down = down_.data() + up_offset_[ci];
  const double* lam = lambda_.data() + offset_[ci];
  const double* cpt = m.cpt(child).data();
  double sum = 0.0;
  for (std::size_t ps = 0; ps < kp; ++ps)
    for (std::size_t s = 0; s < k; ++s) sum += (out[ps * k + s] = down[ps] * cpt[ps * k + s] * lam[s]);
  for (std::size_t i = 0; i < kp * k; ++i) out[i] /= sum;
}

std::vector<int> evidence_states(const LatentTreeModel& model, const Evidence& evidence) {
  std::vector<int> states(model.size(), kMissing);
  for (const auto& [name, value] : evidence) {
    const NodeId v = model.index(name);
    if (model.is_latent(v)) data_error("evidence on latent variable '" + name + "'");
    if (value == kMissing) continue;
    if (value < 0 || value >= model.cardinality(v))
      data_error("state " + std::to_string(value) + " out of range for '" + name + "'");
    states[static_cast<std::size_t>(v)] = value;
  }
  return states;
}

double record_loglik(const LatentTreeModel& model, const Evidence& evidence) {
  TreePropagator prop(model);
  return prop.propagate(evidence_states(model, evidence), false);
}

std::vector<double> posterior(const LatentTreeModel& model, const Evidence& evidence, std::string_view latent) {
  TreePropagator prop(model);
  const NodeId v = model.index(latent);
  if (!model.is_latent(v)) data_error("'" + std::string(latent) + "' is not a latent variable");
  if (prop.propagate(evidence_states(model, evidence)) == kNegInf)
    numerical_error("evidence has probability zero under the model");
  auto post = prop.node_posterior(v);
  return {post.begin(), post.end()};
}

std::vector<double> edge_posterior(const LatentTreeModel& model, const Evidence& evidence,
                                   std::string_view first, std::string_view second) {
  TreePropagator prop(model);
  const NodeId a = model.index(first);
  const NodeId b = model.index(second);
  if (!model.adjacent(a, b))
    data_error("no edge between '" + std::string(first) + "' and '" + std::string(second) + "'");
  if (prop.propagate(evidence_states(model, evidence)) == kNegInf)
    numerical_error("evidence has probability zero under the model");
  const bool a_is_parent = model.parent(b) == a;
  const NodeId child = a_is_parent ? b : a;
  const auto kc = static_cast<std::size_t>(model.cardinality(child));
  const auto kp = static_cast<std::size_t>(model.cardinality(model.parent(child)));
  std::vector<double> table(kp * kc);
  prop.edge_posterior(child, table);
  if (a_is_parent) return table;
  std::vector<double> transposed(kp * kc);
  for (std::size_t ps = 0; ps < kp; ++ps)
    for (std::size_t s = 0; s < kc; ++s) transposed[s * kp + ps] = table[ps * kc + s];
  return transposed;
}

double dataset_loglik(const LatentTreeModel& model, const DataSet& data) {
  DataBinding binding(model, data);
  TreePropagator prop(model);
  std::vector<int> states(model.size());
  // Neumaier summation in record order: reproducible and accurate.
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t r = 0; r < data.num_records(); ++r) {
    binding.fill(r, states);
    const double ll = prop.propagate(states, false);
    if (ll == kNegInf) return kNegInf;
    const double term = data.weight(r) * ll;
    const double t = sum + term;
    comp += std::fabs(sum) >= std::fabs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

DataBinding::DataBinding(const LatentTreeModel& model, const DataSet& data, bool allow_extra)
    : data_(&data), model_size_(model.size()) {
  for (const auto& name : data.names()) {
    auto v = model.find(name);
    if (!v) {
      if (!allow_extra) data_error("dataset variable '" + name + "' is not in the model");
      nodes_.push_back(kNoNode);
      continue;
    }
    if (model.is_latent(*v)) data_error("dataset variable '" + name + "' is latent in the model");
    nodes_.push_back(*v);
  }
  for (std::size_t r = 0; r < data.num_records(); ++r) {
    for (std::size_t c = 0; c < nodes_.size(); ++c) {
      if (nodes_[c] == kNoNode) continue;
      const int x = data.value(r, c);
      if (x != kMissing && x >= model.cardinality(nodes_[c]))
        data_error("record " + std::to_string(r + 1) + ": state " + std::to_string(x) + " of '" +
                   data.names()[c] + "' exceeds the model cardinality " +
                   std::to_string(model.cardinality(nodes_[c])));
    }
  }
}

void DataBinding::fill(std::size_t record, std::span<int> states) const {
  std::fill(states.begin(), states.end(), kMissing);
  auto row = data_->row(record);
  for (std::size_t c = 0; c < nodes_.size(); ++c)
    if (nodes_[c] != kNoNode) states[static_cast<std::size_t>(nodes_[c])] = row[c];
}

}  // namespace ltm
