#include "ltm/em.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "parallel.hpp"

namespace ltm {

void EmConfig::check() const {
  if (max_iterations < 1) usage_error("EM max iterations must be at least 1");
  if (!(tolerance > 0.0)) usage_error("EM tolerance must be positive");
  if (restarts < 1) usage_error("EM restarts must be at least 1");
  if (!(smoothing >= 0.0)) usage_error("EM smoothing must be nonnegative");
}

double bic_score(double loglik, long dim, double n) {
  if (!(n > 0.0)) data_error("BIC needs a positive sample size");
  return loglik - 0.5 * static_cast<double>(dim) * std::log(n);
}

double bic(const LatentTreeModel& model, const DataSet& data) {
  if (!(data.total_weight() > 0.0)) data_error("BIC needs a positive sample size");
  return bic_score(dataset_loglik(model, data), dimension(model), data.total_weight());
}

namespace {

std::vector<std::vector<double>> table_shapes(const LatentTreeModel& skeleton) {
  std::vector<std::vector<double>> cpts(skeleton.size());
  for (NodeId v : skeleton.preorder()) {
    const NodeId p = skeleton.parent(v);
    const auto rows = static_cast<std::size_t>(p == kNoNode ? 1 : skeleton.cardinality(p));
    cpts[static_cast<std::size_t>(v)].assign(rows * static_cast<std::size_t>(skeleton.cardinality(v)), 0.0);
  }
  return cpts;
}

double relative_gain(double now, double before) { return (now - before) / (std::fabs(before) + 1.0); }

}  // namespace

LatentTreeModel uniform_parameters(const LatentTreeModel& skeleton) {
  auto cpts = table_shapes(skeleton);
  for (std::size_t v = 0; v < cpts.size(); ++v)
    std::fill(cpts[v].begin(), cpts[v].end(), 1.0 / skeleton.cardinality(static_cast<NodeId>(v)));
  return skeleton.with_cpts(std::move(cpts));
}

LatentTreeModel random_parameters(const LatentTreeModel& skeleton, Rng& rng) {
  auto cpts = table_shapes(skeleton);
  for (std::size_t v = 0; v < cpts.size(); ++v) {
    const auto k = static_cast<std::size_t>(skeleton.cardinality(static_cast<NodeId>(v)));
    for (std::size_t off = 0; off < cpts[v].size(); off += k)
      rng.dirichlet1(std::span<double>(cpts[v]).subspan(off, k));
  }
  return skeleton.with_cpts(std::move(cpts));
}

FitResult run_em(const LatentTreeModel& init, const DataSet& data, const EmConfig& config,
                 std::span<const char> free_nodes) {
  config.check();
  require_valid(init);
  const std::size_t n = init.size();
  auto is_free = [&](std::size_t v) { return free_nodes.empty() || free_nodes[v]; };

  DataBinding binding(init, data);
  LatentTreeModel model = init;
  FitResult result;
  std::vector<int> states(n);
  auto counts = table_shapes(init);
  std::vector<double> edge;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    TreePropagator prop(model);
    for (auto& c : counts) std::fill(c.begin(), c.end(), 0.0);
    double ll = 0.0;
    for (std::size_t r = 0; r < data.num_records(); ++r) {
      binding.fill(r, states);
      const double lr = prop.propagate(states, true);
      if (lr == kNegInf) numerical_error("record " + std::to_string(r + 1) + " has probability zero under the model");
      const double w = data.weight(r);
      ll += w * lr;
      for (std::size_t v = 0; v < n; ++v) {
        if (!is_free(v)) continue;
        const auto node = static_cast<NodeId>(v);
        auto& c = counts[v];
        if (model.parent(node) == kNoNode) {
          auto post = prop.node_posterior(node);
          for (std::size_t s = 0; s < post.size(); ++s) c[s] += w * post[s];
          continue;
        }
        edge.resize(c.size());
        prop.edge_posterior(node, edge);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += w * edge[i];
      }
    }
    result.loglik = ll;
    // Smoothed M-steps ascend loglik + c * sum(log theta), not loglik itself.
    double objective = ll;
    if (config.smoothing > 0.0)
      for (std::size_t v = 0; v < n; ++v)
        if (is_free(v))
          for (double p : model.cpts()[v]) objective += config.smoothing * std::log(p);
    result.trace.push_back(objective);
    if (iter > 0 && relative_gain(objective, result.trace[result.trace.size() - 2]) < config.tolerance) break;
    if (iter + 1 == config.max_iterations) break;

    auto cpts = model.cpts();
    for (std::size_t v = 0; v < n; ++v) {
      if (!is_free(v)) continue;
      const auto k = static_cast<std::size_t>(model.cardinality(static_cast<NodeId>(v)));
      auto& table = cpts[v];
      for (std::size_t off = 0; off < table.size(); off += k) {
        double total = 0.0;
        for (std::size_t s = 0; s < k; ++s) total += counts[v][off + s] + config.smoothing;
        // A parent state with no expected mass keeps its column.
        if (!(total > 0.0)) continue;
        for (std::size_t s = 0; s < k; ++s) table[off + s] = (counts[v][off + s] + config.smoothing) / total;
      }
    }
    model = model.with_cpts(std::move(cpts));
  }

  result.bic = bic_score(result.loglik, dimension(model), data.total_weight());
  result.model = std::move(model);
  result.restart_logliks = {result.loglik};
  return result;
}

FitResult fit_em(const LatentTreeModel& skeleton, const DataSet& data, const EmConfig& config) {
  config.check();
  const LatentTreeModel shape = uniform_parameters(skeleton);
  require_valid(shape);
  std::vector<std::string> names;
  for (NodeId v : shape.observed()) names.push_back(shape.name(v));
  for (const auto& name : names)
    if (!data.column(name)) data_error("dataset has no column for model variable '" + name + "'");
  if (data.empty() || !(data.total_weight() > 0.0)) data_error("cannot fit a model to an empty dataset");
  const DataSet patterns = data.project(names).dedupe();

  auto runs = detail::parallel_map(static_cast<std::size_t>(config.restarts), config.threads, [&](std::size_t r) {
    Rng rng(substream(config.seed, stream::kEmInit, r));
    return run_em(random_parameters(shape, rng), patterns, config);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].loglik > runs[best].loglik) best = r;
  FitResult result = std::move(runs[best]);
  result.restart_logliks.clear();
  for (const auto& run : runs) result.restart_logliks.push_back(run.loglik);
  return result;
}

LcaResult fit_lca(const DataSet& data, std::span<const std::string> variables, std::span<const int> cardinalities,
                  const EmConfig& config, const std::string& latent_name) {
  if (cardinalities.empty()) usage_error("the cardinality range is empty");
  std::set<int> cards(cardinalities.begin(), cardinalities.end());
  if (*cards.begin() < 1) usage_error("latent cardinalities must be at least 1");

  std::vector<std::string> names(variables.begin(), variables.end());
  if (names.empty()) names = data.names();
  std::vector<Variable> observed;
  for (const auto& name : names) {
    auto col = data.column(name);
    if (!col) data_error("dataset has no variable '" + name + "'");
    observed.push_back({name, VariableKind::Observed, data.cardinalities()[*col]});
  }

  LcaResult out;
  for (int k : cards) {
    out.cardinalities.push_back(k);
    out.fits.push_back(fit_em(make_lcm_skeleton(latent_name, k, observed), data, config));
  }
  for (std::size_t i = 1; i < out.fits.size(); ++i)
    if (out.fits[i].bic > out.fits[out.selected].bic + 1e-6) out.selected = i;
  return out;
}

}  // namespace ltm
