#include "ltm/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "parallel.hpp"

namespace ltm {

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Expansion: return "expansion";
    case Phase::Adjustment: return "adjustment";
    case Phase::Simplification: return "simplification";
  }
  return "?";
}

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::StateIntroduction: return "StateIntroduction";
    case OperatorKind::NodeIntroduction: return "NodeIntroduction";
    case OperatorKind::NodeRelocation: return "NodeRelocation";
    case OperatorKind::StateDeletion: return "StateDeletion";
    case OperatorKind::NodeDeletion: return "NodeDeletion";
  }
  return "?";
}

std::string SearchOperator::describe() const {
  std::string out = to_string(kind);
  switch (kind) {
    case OperatorKind::StateIntroduction:
    case OperatorKind::StateDeletion: return out + "(" + latent + ")";
    case OperatorKind::NodeIntroduction: return out + "(" + latent + ": " + first + "," + second + " -> " + created + ")";
    case OperatorKind::NodeRelocation: return out + "(" + first + ": " + latent + " -> " + destination + ")";
    case OperatorKind::NodeDeletion: return out + "(" + latent + " -> " + destination + ")";
  }
  return out;
}

void SearchConfig::check() const {
  em.check();
  if (screening_iterations < 1) usage_error("screening iterations must be at least 1");
  if (max_latent_cardinality < 2) usage_error("maximum latent cardinality must be at least 2");
  if (max_latent_count < 0) usage_error("maximum latent count must be nonnegative");
  if (initial_max_cardinality < 1) usage_error("initial LCM cardinality bound must be at least 1");
}

namespace {

using NamePair = std::pair<std::string, std::string>;

std::string next_latent_name(const LatentTreeModel& model) {
  int highest = 0;
  for (const auto& var : model.variables()) {
    const auto& n = var.name;
    if (n.size() < 2 || n[0] != 'Y') continue;
    if (!std::all_of(n.begin() + 1, n.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    if (n.size() > 10) continue;
    highest = std::max(highest, std::stoi(n.substr(1)));
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "Y%02d", highest + 1);
  return buf;
}

std::vector<NodeId> sorted_by_name(const LatentTreeModel& m, std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) { return m.name(a) < m.name(b); });
  return ids;
}

std::vector<NodeId> neighbors_by_name(const LatentTreeModel& m, NodeId v) {
  auto nb = m.neighbors(v);
  return sorted_by_name(m, {nb.begin(), nb.end()});
}

std::vector<NamePair> named_edges(const LatentTreeModel& m) {
  std::vector<NamePair> out;
  for (const auto& e : m.edges()) out.emplace_back(m.name(e.a), m.name(e.b));
  return out;
}

bool same_edge(const NamePair& e, const std::string& a, const std::string& b) {
  return (e.first == a && e.second == b) || (e.first == b && e.second == a);
}

void normalize_rows(std::vector<double>& table, std::size_t k) {
  for (std::size_t off = 0; off < table.size(); off += k) {
    double sum = 0.0;
    for (std::size_t s = 0; s < k; ++s) sum += table[off + s];
    for (std::size_t s = 0; s < k; ++s) table[off + s] = sum > 0.0 ? table[off + s] / sum : 1.0 / static_cast<double>(k);
  }
}

// Rebuilds parameters for a new structure over (mostly) the old variables.
Candidate restructure(const LatentTreeModel& old, std::vector<Variable> vars, const std::vector<NamePair>& edges,
                      const std::string& root, Rng& rng) {
  LatentTreeModel shell = make_model(std::move(vars), edges, root, {});
  const auto old_marg = node_marginals(old);
  std::vector<std::vector<double>> cpts(shell.size());
  std::vector<char> fresh(shell.size(), 0);

  for (NodeId v : shell.preorder()) {
    const auto vi = static_cast<std::size_t>(v);
    const auto k = static_cast<std::size_t>(shell.cardinality(v));
    const NodeId p = shell.parent(v);
    const auto rows = static_cast<std::size_t>(p == kNoNode ? 1 : shell.cardinality(p));
    auto& table = cpts[vi];
    table.assign(rows * k, 0.0);

    auto ov = old.find(shell.name(v));
    const bool v_kept = ov && old.cardinality(*ov) == shell.cardinality(v);
    std::optional<NodeId> op;
    if (p != kNoNode) op = old.find(shell.name(p));
    const bool p_kept = p != kNoNode && op && old.cardinality(*op) == shell.cardinality(p);

    if (p == kNoNode && v_kept) {
      table = old_marg[static_cast<std::size_t>(*ov)];
    } else if (p != kNoNode && v_kept && p_kept) {
      if (old.parent(*ov) == *op) {
        table.assign(old.cpt(*ov).begin(), old.cpt(*ov).end());
      } else {
        // Conditional from the old joint; exact when the edge only flipped.
        const std::vector<std::string> pair{shell.name(p), shell.name(v)};
        table = marginal(old, pair).values;
        normalize_rows(table, k);
        fresh[vi] = old.parent(*op) != *ov;
      }
    } else {
      for (std::size_t off = 0; off < table.size(); off += k) rng.dirichlet1(std::span<double>(table).subspan(off, k));
      fresh[vi] = 1;
    }
  }
  Candidate out{shell.with_cpts(std::move(cpts)), std::move(fresh)};
  require_valid(out.model);
  return out;
}

Candidate change_states(const LatentTreeModel& old, NodeId y, bool add, Rng& rng) {
  const auto marg = node_marginals(old);
  const auto& my = marg[static_cast<std::size_t>(y)];
  const auto k = static_cast<std::size_t>(old.cardinality(y));
  // Split the heaviest state, or drop the lightest one.
  const auto pick = static_cast<std::size_t>(
      add ? std::max_element(my.begin(), my.end()) - my.begin() : std::min_element(my.begin(), my.end()) - my.begin());
  const std::size_t nk = add ? k + 1 : k - 1;

  auto vars = old.variables();
  vars[static_cast<std::size_t>(y)].cardinality = static_cast<int>(nk);
  auto cpts = old.cpts();

  // Y's own table: one row per parent state, columns are Y's states.
  {
    auto& table = cpts[static_cast<std::size_t>(y)];
    std::vector<double> next;
    for (std::size_t off = 0; off < table.size(); off += k) {
      for (std::size_t s = 0; s < k; ++s) {
        if (!add && s == pick) continue;
        next.push_back(add && s == pick ? table[off + s] / 2 : table[off + s]);
      }
      if (add) next.push_back(table[off + pick] / 2);
    }
    normalize_rows(next, nk);
    table = std::move(next);
  }

  std::vector<char> fresh(old.size(), 0);
  fresh[static_cast<std::size_t>(y)] = 1;
  for (NodeId c : old.children(y)) {
    fresh[static_cast<std::size_t>(c)] = 1;
    auto& table = cpts[static_cast<std::size_t>(c)];
    const auto kc = static_cast<std::size_t>(old.cardinality(c));
    if (add) {
      std::vector<double> jitter(kc);
      rng.dirichlet1(jitter);
      for (std::size_t t = 0; t < kc; ++t) table.push_back(0.9 * table[pick * kc + t] + 0.1 * jitter[t]);
    } else {
      table.erase(table.begin() + static_cast<std::ptrdiff_t>(pick * kc),
                  table.begin() + static_cast<std::ptrdiff_t>((pick + 1) * kc));
    }
  }

  LatentTreeModel shell(std::move(vars), old.edges(), old.root(), std::move(cpts));
  require_valid(shell);
  return {std::move(shell), std::move(fresh)};
}

}  // namespace

std::vector<SearchOperator> enumerate_candidates(const LatentTreeModel& model, Phase phase, const SearchConfig& config) {
  require_valid(model);
  const auto latents = sorted_by_name(model, model.latents());
  const std::size_t max_latents =
      config.max_latent_count > 0 ? static_cast<std::size_t>(config.max_latent_count) : model.observed().size();
  std::vector<SearchOperator> out;

  switch (phase) {
    case Phase::Expansion: {
      for (NodeId y : latents)
        if (model.cardinality(y) < config.max_latent_cardinality)
          out.push_back({OperatorKind::StateIntroduction, model.name(y), {}, {}, {}, {}});
      if (latents.size() >= max_latents) break;
      const std::string created = next_latent_name(model);
      for (NodeId y : latents) {
        if (model.degree(y) < 3) continue;
        const auto nb = neighbors_by_name(model, y);
        for (std::size_t i = 0; i < nb.size(); ++i)
          for (std::size_t j = i + 1; j < nb.size(); ++j)
            out.push_back({OperatorKind::NodeIntroduction, model.name(y), model.name(nb[i]), model.name(nb[j]), {}, created});
      }
      break;
    }
    case Phase::Adjustment: {
      for (NodeId y : latents) {
        if (model.degree(y) < 3) continue;
        const auto nb = neighbors_by_name(model, y);
        for (NodeId moved : nb)
          for (NodeId dest : nb)
            if (dest != moved && model.is_latent(dest))
              out.push_back({OperatorKind::NodeRelocation, model.name(y), model.name(moved), {}, model.name(dest), {}});
      }
      break;
    }
    case Phase::Simplification: {
      for (NodeId y : latents)
        if (model.cardinality(y) >= 2) out.push_back({OperatorKind::StateDeletion, model.name(y), {}, {}, {}, {}});
      for (NodeId y : latents) {
        if (model.degree(y) > 3) continue;
        for (NodeId dest : neighbors_by_name(model, y))
          if (model.is_latent(dest))
            out.push_back({OperatorKind::NodeDeletion, model.name(y), {}, {}, model.name(dest), {}});
      }
      break;
    }
  }
  return out;
}

Candidate apply_operator(const LatentTreeModel& model, const SearchOperator& op, Rng& rng) {
  require_valid(model);
  const NodeId y = model.index(op.latent);
  if (!model.is_latent(y)) data_error("'" + op.latent + "' is not a latent variable");
  const std::string root = model.name(model.root());
  auto edges = named_edges(model);
  auto vars = model.variables();

  switch (op.kind) {
    case OperatorKind::StateIntroduction:
      return change_states(model, y, true, rng);
    case OperatorKind::StateDeletion:
      if (model.cardinality(y) < 2) data_error("cannot delete a state of single-state latent '" + op.latent + "'");
      return change_states(model, y, false, rng);
    case OperatorKind::NodeIntroduction: {
      const NodeId a = model.index(op.first);
      const NodeId b = model.index(op.second);
      if (!model.adjacent(y, a) || !model.adjacent(y, b) || a == b)
        data_error("node introduction needs two distinct neighbors of '" + op.latent + "'");
      if (model.find(op.created)) data_error("latent name '" + op.created + "' is already taken");
      std::erase_if(edges, [&](const NamePair& e) { return same_edge(e, op.latent, op.first) || same_edge(e, op.latent, op.second); });
      vars.push_back({op.created, VariableKind::Latent, 2});
      edges.emplace_back(op.latent, op.created);
      edges.emplace_back(op.created, op.first);
      edges.emplace_back(op.created, op.second);
      return restructure(model, std::move(vars), edges, root, rng);
    }
    case OperatorKind::NodeRelocation: {
      const NodeId moved = model.index(op.first);
      const NodeId dest = model.index(op.destination);
      if (!model.adjacent(y, moved) || !model.adjacent(y, dest) || !model.is_latent(dest) || moved == dest)
        data_error("invalid relocation " + op.describe());
      std::erase_if(edges, [&](const NamePair& e) { return same_edge(e, op.latent, op.first); });
      edges.emplace_back(op.destination, op.first);
      return restructure(model, std::move(vars), edges, root, rng);
    }
    case OperatorKind::NodeDeletion: {
      const NodeId dest = model.index(op.destination);
      if (!model.adjacent(y, dest) || !model.is_latent(dest)) data_error("invalid deletion " + op.describe());
      std::erase_if(edges, [&](const NamePair& e) { return e.first == op.latent || e.second == op.latent; });
      for (NodeId n : model.neighbors(y))
        if (n != dest) edges.emplace_back(op.destination, model.name(n));
      std::erase_if(vars, [&](const Variable& v) { return v.name == op.latent; });
      return restructure(model, std::move(vars), edges, root == op.latent ? op.destination : root, rng);
    }
  }
  data_error("unknown operator");
}

namespace {

struct Screened {
  LatentTreeModel model;
  double bic = kNegInf;
  long dim = 0;
};

}  // namespace

SearchResult search(const DataSet& data, const SearchConfig& config) {
  config.check();
  if (data.empty() || !(data.total_weight() > 0.0)) data_error("cannot search on an empty dataset");
  if (data.num_variables() < 2) data_error("structure search needs at least two observed variables");

  SearchResult result;
  for (std::size_t c = 0; c < data.num_variables(); ++c) {
    std::set<int> seen;
    for (std::size_t r = 0; r < data.num_records(); ++r)
      if (data.value(r, c) != kMissing) seen.insert(data.value(r, c));
    if (seen.size() < 2)
      result.warnings.push_back("variable '" + data.names()[c] + "' takes a single observed state");
  }

  const DataSet patterns = data.dedupe();
  std::vector<int> cards;
  for (int k = 1; k <= std::min(config.initial_max_cardinality, config.max_latent_cardinality); ++k) cards.push_back(k);
  auto lca = fit_lca(patterns, {}, cards, config.em, "Y01");
  FitResult current = lca.best();
  result.initial_bic = current.bic;

  EmConfig screen = config.em;
  screen.max_iterations = config.screening_iterations;
  std::uint64_t round = 0;

  for (bool improved = true; improved;) {
    improved = false;
    for (Phase phase : {Phase::Expansion, Phase::Adjustment, Phase::Simplification}) {
      for (;;) {
        const auto ops = enumerate_candidates(current.model, phase, config);
        if (ops.empty()) break;
        const std::uint64_t round_seed = substream(config.seed, stream::kSearch, round++);
        auto screened = detail::parallel_map(ops.size(), config.em.threads, [&](std::size_t i) {
          Rng rng(substream(round_seed, 0, i));
          Candidate cand = apply_operator(current.model, ops[i], rng);
          Screened s{cand.model, kNegInf, dimension(cand.model)};
          try {
            auto fit = run_em(cand.model, patterns, screen, cand.free_nodes);
            s.model = std::move(fit.model);
            s.bic = fit.bic;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numerical) throw;
          }
          return s;
        });

        std::size_t best = 0;
        for (std::size_t i = 1; i < screened.size(); ++i) {
          const auto& a = screened[i];
          const auto& b = screened[best];
          if (a.bic > b.bic + 1e-9) best = i;
          else if (std::fabs(a.bic - b.bic) <= 1e-9 &&
                   (a.dim < b.dim || (a.dim == b.dim && ops[i].describe() < ops[best].describe())))
            best = i;
        }
        if (screened[best].bic == kNegInf) break;

        FitResult refit;
        try {
          refit = run_em(screened[best].model, patterns, config.em);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Numerical) throw;
          break;
        }
        if (!(refit.bic > current.bic + 1e-9)) break;
        result.steps.push_back({phase, ops[best], current.bic, refit.bic});
        current = std::move(refit);
        improved = true;
      }
    }
  }
  result.fit = std::move(current);
  return result;
}

std::string format_search_log(const SearchResult& result) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "initial\tLCM\t" << result.initial_bic << "\t" << result.initial_bic << "\n";
  for (const auto& s : result.steps)
    os << to_string(s.phase) << "\t" << s.op.describe() << "\t" << s.bic_before << "\t" << s.bic_after << "\n";
  return os.str();
}

}  // namespace ltm
