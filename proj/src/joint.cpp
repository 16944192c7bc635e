#include "ltm/joint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"

namespace ltm {

namespace {

std::string fmt(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

NodeId require_latent(const LatentTreeModel& model, std::string_view name) {
  const NodeId v = model.index(name);
  if (!model.is_latent(v)) data_error("'" + std::string(name) + "' is not a latent variable");
  return v;
}

// Target states as a membership mask over the latent's states.
std::vector<char> target_mask(int cardinality, std::span<const int> target) {
  std::vector<char> mask(static_cast<std::size_t>(cardinality), 0);
  for (int s : target) {
    if (s < 0 || s >= cardinality)
      usage_error("target state " + std::to_string(s) + " is out of range for a variable with " +
                  std::to_string(cardinality) + " states");
    if (mask[static_cast<std::size_t>(s)]) usage_error("target state " + std::to_string(s) + " is listed twice");
    mask[static_cast<std::size_t>(s)] = 1;
  }
  if (target.empty()) usage_error("the target state set is empty");
  if (target.size() == mask.size()) usage_error("the target state set covers every state");
  return mask;
}

// sum_z P(z|x) ln(P(z|x)/P(z)).
double posterior_information(std::span<const double> post, std::span<const double> prior) {
  double info = 0.0;
  for (std::size_t z = 0; z < post.size(); ++z)
    if (post[z] > 0.0) info += post[z] * std::log(post[z] / prior[z]);
  return info;
}

std::string state_label(std::span<const int> states) {
  std::string out = "s";
  const bool compact = std::all_of(states.begin(), states.end(), [](int s) { return s < 10; });
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!compact && i > 0) out += "+s";
    out += std::to_string(states[i]);
  }
  return out;
}

}  // namespace

void FeatureGroupSpec::check() const {
  if (groups.empty()) data_error("group spec declares no groups");
  std::set<std::string> labels;
  std::set<std::string> seen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    const std::string where = "groups[" + std::to_string(g) + "]";
    if (group.label.empty()) data_error(where + ".label is empty");
    if (!labels.insert(group.label).second) data_error(where + ".label '" + group.label + "' is used twice");
    if (group.symptoms.empty()) data_error(where + " has no symptoms");
    if (group.cardinality < 0) data_error(where + ".cardinality must be positive, or 0 for automatic");
    for (const auto& s : group.symptoms)
      if (!seen.insert(s).second) data_error("symptom '" + s + "' appears in more than one group");
  }
  for (const auto& group : groups)
    if (group.symptoms.size() > 1 && seen.count(group.label))
      data_error("group label '" + group.label + "' clashes with a symptom name");
  for (int k : z_cardinalities)
    if (k < 1) data_error("Z cardinalities must be at least 1");
}

std::vector<std::string> FeatureGroupSpec::symptoms() const {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.symptoms.begin(), g.symptoms.end());
  return out;
}

LatentTreeModel build_skeleton(const FeatureGroupSpec& spec, int z_cardinality,
                               const std::map<std::string, int>& symptom_cardinalities, const std::string& z_name) {
  spec.check();
  if (z_cardinality < 1) usage_error("Z cardinality must be at least 1");
  auto card_of = [&](const std::string& s) {
    auto it = symptom_cardinalities.find(s);
    return it == symptom_cardinalities.end() ? 2 : it->second;
  };

  std::vector<Variable> vars{{z_name, VariableKind::Latent, z_cardinality}};
  std::vector<Edge> edges;
  for (const auto& group : spec.groups) {
    if (group.symptoms.size() == 1) {
      vars.push_back({group.symptoms[0], VariableKind::Observed, card_of(group.symptoms[0])});
      edges.push_back({0, static_cast<NodeId>(vars.size() - 1)});
      continue;
    }
    const auto mid = static_cast<NodeId>(vars.size());
    vars.push_back({group.label, VariableKind::Latent, group.cardinality == 0 ? 2 : group.cardinality});
    edges.push_back({0, mid});
    for (const auto& s : group.symptoms) {
      vars.push_back({s, VariableKind::Observed, card_of(s)});
      edges.push_back({mid, static_cast<NodeId>(vars.size() - 1)});
    }
  }
  for (std::size_t v = 1; v < vars.size(); ++v)
    if (vars[v].name == z_name) data_error("'" + z_name + "' is used both for Z and inside a group");
  LatentTreeModel skeleton(vars, edges, 0, {});
  return uniform_parameters(skeleton);
}

JointFit fit_joint(const DataSet& data, const FeatureGroupSpec& spec, const EmConfig& config,
                   const std::string& z_name) {
  spec.check();
  config.check();
  if (spec.z_cardinalities.empty()) usage_error("the Z cardinality range is empty");
  std::map<std::string, int> cards;
  for (const auto& s : spec.symptoms()) {
    auto col = data.column(s);
    if (!col) data_error("dataset has no column for symptom '" + s + "'");
    cards[s] = data.cardinalities()[*col];
  }

  FeatureGroupSpec working = spec;
  std::vector<std::size_t> auto_groups;
  for (std::size_t g = 0; g < working.groups.size(); ++g)
    if (working.groups[g].cardinality == 0) {
      working.groups[g].cardinality = 2;
      if (working.groups[g].symptoms.size() > 1) auto_groups.push_back(g);
    }

  auto skeleton_for = [&](const FeatureGroupSpec& s, int k) {
    auto skeleton = build_skeleton(s, k, cards, z_name);
    if (!skeleton.valid()) {
      std::string msg = "the group spec does not give a valid latent tree";
      for (const auto& v : skeleton.violations()) msg += "; " + v;
      data_error(msg);
    }
    return skeleton;
  };

  JointFit out;
  std::set<int> ks(spec.z_cardinalities.begin(), spec.z_cardinalities.end());
  for (int k : ks) {
    out.z_cardinalities.push_back(k);
    out.fits.push_back(fit_em(skeleton_for(working, k), data, config));
  }
  for (std::size_t i = 1; i < out.fits.size(); ++i)
    if (out.fits[i].bic > out.fits[out.selected].bic + 1e-6) out.selected = i;

  const int z_card = out.z_cardinalities[out.selected];
  for (std::size_t g : auto_groups) {
    FeatureGroupSpec trial = working;
    trial.groups[g].cardinality = 3;
    auto fit = fit_em(skeleton_for(trial, z_card), data, config);
    if (fit.bic > out.fits[out.selected].bic + 1e-6) {
      working = std::move(trial);
      out.fits[out.selected] = std::move(fit);
    }
  }
  for (const auto& g : working.groups) out.group_cardinalities.push_back(g.symptoms.size() == 1 ? 1 : g.cardinality);
  return out;
}

std::string format_joint_bic_table(const JointFit& fit) {
  std::ostringstream os;
  os << "z_cardinality\tloglik\tbic\tdimension\tselected\n";
  for (std::size_t i = 0; i < fit.fits.size(); ++i) {
    const auto& f = fit.fits[i];
    os << fit.z_cardinalities[i] << '\t' << fmt(f.loglik, 6) << '\t' << fmt(f.bic, 6) << '\t' << dimension(f.model)
       << '\t' << (i == fit.selected ? 1 : 0) << '\n';
  }
  return os.str();
}

ClassSummary merge_summary(const LatentTreeModel& model, std::string_view latent, std::span<const int> target_states,
                           double smoothing) {
  require_valid(model);
  if (!(smoothing >= 0.0)) usage_error("smoothing must be nonnegative");
  const NodeId z = require_latent(model, latent);
  const int kz = model.cardinality(z);
  const auto mask = target_mask(kz, target_states);

  ClassSummary out;
  out.latent = std::string(latent);
  out.target_states.assign(target_states.begin(), target_states.end());
  std::sort(out.target_states.begin(), out.target_states.end());
  out.smoothing = smoothing;
  const auto pz = node_marginals(model)[static_cast<std::size_t>(z)];
  for (int s = 0; s < kz; ++s) (mask[static_cast<std::size_t>(s)] ? out.prior_target : out.prior_complement) += pz[s];

  for (NodeId x : model.observed()) {
    const std::vector<std::string> pair{std::string(latent), model.name(x)};
    const auto joint = marginal(model, pair);
    const auto kx = static_cast<std::size_t>(model.cardinality(x));
    double in_target = 0.0;
    double in_complement = 0.0;
    for (std::size_t s = 0; s < static_cast<std::size_t>(kz); ++s)
      for (std::size_t t = 1; t < kx; ++t) (mask[s] ? in_target : in_complement) += joint.values[s * kx + t];
    SymptomSummary row;
    row.name = model.name(x);
    row.p_target = (in_target + smoothing) / (out.prior_target + 2.0 * smoothing);
    row.p_complement = (in_complement + smoothing) / (out.prior_complement + 2.0 * smoothing);
    row.p_marginal = in_target + in_complement;
    row.mi = mutual_info(model, latent, row.name);
    out.symptoms.push_back(std::move(row));
  }
  return out;
}

double joint_mutual_info(const LatentTreeModel& model, std::string_view latent, std::span<const std::string> symptoms) {
  require_valid(model);
  const NodeId z = require_latent(model, latent);
  std::vector<NodeId> nodes;
  std::size_t space = 1;
  for (const auto& s : symptoms) {
    const NodeId x = model.index(s);
    if (model.is_latent(x)) data_error("'" + s + "' is not an observed variable");
    nodes.push_back(x);
    space *= static_cast<std::size_t>(model.cardinality(x));
    if (space > kMaxMarginalStates) data_error("joint state space of the symptoms exceeds 2^20");
  }
  const auto prior = node_marginals(model)[static_cast<std::size_t>(z)];
  TreePropagator prop(model);
  std::vector<int> states(model.size(), kMissing);
  for (NodeId x : nodes) states[static_cast<std::size_t>(x)] = 0;

  double info = 0.0;
  for (std::size_t a = 0; a < space; ++a) {
    const double ll = prop.propagate(states, true);
    if (ll != kNegInf) info += std::exp(ll) * posterior_information(prop.node_posterior(z), prior);
    // Odometer over the symptom states, last symptom fastest.
    for (std::size_t i = nodes.size(); i-- > 0;) {
      int& s = states[static_cast<std::size_t>(nodes[i])];
      if (++s < model.cardinality(nodes[i])) break;
      s = 0;
    }
  }
  return std::max(0.0, info);
}

CicTable cic_table(const LatentTreeModel& model, std::string_view latent, std::span<const std::string> symptoms,
                   std::uint64_t seed, std::size_t samples) {
  require_valid(model);
  const NodeId z = require_latent(model, latent);
  CicTable out;
  out.seed = seed;
  std::size_t space = 1;
  for (const auto& s : symptoms) {
    const NodeId x = model.index(s);
    if (model.is_latent(x)) data_error("'" + s + "' is not an observed variable");
    out.rows.push_back({s, mutual_info(model, latent, s), 0.0});
    space = std::min(space * static_cast<std::size_t>(model.cardinality(x)), kMaxMarginalStates + 1);
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const CicRow& a, const CicRow& b) { return a.mi > b.mi || (a.mi == b.mi && a.symptom < b.symptom); });
  const std::size_t n = out.rows.size();
  std::vector<double> info(n, 0.0);
  out.exact = space <= kMaxMarginalStates;

  if (out.exact) {
    std::vector<std::string> prefix;
    for (std::size_t k = 0; k < n; ++k) {
      prefix.push_back(out.rows[k].symptom);
      info[k] = joint_mutual_info(model, latent, prefix);
    }
  } else {
    if (samples == 0) usage_error("Monte Carlo CIC needs at least one sample");
    out.samples = samples;
    const auto prior = node_marginals(model)[static_cast<std::size_t>(z)];
    const DataSet draws = forward_sample(model, samples, substream(seed, stream::kCic));
    std::vector<std::size_t> cols;
    std::vector<NodeId> nodes;
    for (const auto& row : out.rows) {
      cols.push_back(*draws.column(row.symptom));
      nodes.push_back(model.index(row.symptom));
    }
    TreePropagator prop(model);
    std::vector<int> states(model.size(), kMissing);
    for (std::size_t r = 0; r < samples; ++r) {
      std::fill(states.begin(), states.end(), kMissing);
      for (std::size_t k = 0; k < n; ++k) {
        states[static_cast<std::size_t>(nodes[k])] = draws.value(r, cols[k]);
        prop.propagate(states, true);
        info[k] += posterior_information(prop.node_posterior(z), prior);
      }
    }
    for (double& v : info) v /= static_cast<double>(samples);
  }

  const double total = n == 0 ? 0.0 : info.back();
  out.cut = n;
  for (std::size_t k = 0; k < n; ++k) {
    out.rows[k].cic = total > 0.0 ? std::min(1.0, info[k] / total) : 1.0;
    if (out.cut == n && out.rows[k].cic >= kCicCut) out.cut = k;
  }
  return out;
}

JointReport build_joint_report(const LatentTreeModel& model, std::string_view latent,
                               std::span<const int> target_states, const std::string& target_label,
                               double smoothing, std::uint64_t seed, std::size_t samples) {
  require_valid(model);
  const NodeId z = require_latent(model, latent);
  JointReport report;
  report.latent = std::string(latent);
  report.target_label = target_label;
  report.sizes = node_marginals(model)[static_cast<std::size_t>(z)];

  std::vector<std::string> symptoms;
  for (NodeId x : model.observed()) symptoms.push_back(model.name(x));
  const auto occurrence = occurrence_table(model, latent, symptoms);
  const auto cic = cic_table(model, latent, symptoms, seed, samples);
  std::optional<ClassSummary> summary;
  if (!target_states.empty()) {
    summary = merge_summary(model, latent, target_states, smoothing);
    report.target_states = summary->target_states;
    report.merged_size = summary->prior_target;
  }
  report.cut = cic.cut;
  report.exact = cic.exact;
  report.samples = cic.samples;
  report.seed = cic.seed;

  for (const auto& row : cic.rows) {
    const auto i = static_cast<std::size_t>(std::find(symptoms.begin(), symptoms.end(), row.symptom) - symptoms.begin());
    JointRow out{row.symptom, occurrence.presence[i], std::nullopt, row.mi, row.cic};
    if (summary) out.merged = summary->symptoms[i].p_target;
    report.rows.push_back(std::move(out));
  }
  return report;
}

std::string format_joint_tsv(const JointReport& report) {
  std::ostringstream os;
  os << "symptom";
  for (std::size_t s = 0; s < report.sizes.size(); ++s) os << '\t' << report.latent << "=s" << s;
  if (report.merged_size) os << '\t' << report.latent << '=' << state_label(report.target_states);
  os << "\tMI\tCIC\n";
  os << "size";
  for (double p : report.sizes) os << '\t' << fmt(p, 6);
  if (report.merged_size) os << '\t' << fmt(*report.merged_size, 6);
  os << "\t\t\n";
  for (const auto& row : report.rows) {
    os << row.symptom;
    for (double p : row.presence) os << '\t' << fmt(p, 6);
    if (row.merged) os << '\t' << fmt(*row.merged, 6);
    os << '\t' << fmt(row.mi, 6) << '\t' << fmt(row.cic, 6) << '\n';
  }
  if (report.cut < report.rows.size()) os << "#cut\t" << report.rows[report.cut].symptom << '\n';
  if (!report.target_states.empty()) {
    os << "#target";
    for (std::size_t i = 0; i < report.target_states.size(); ++i) os << (i ? ',' : '\t') << report.target_states[i];
    if (!report.target_label.empty()) os << '\t' << report.target_label;
    os << '\n';
  }
  if (report.exact) os << "#estimator\texact\n";
  else os << "#estimator\tmonte-carlo\t" << report.samples << '\t' << report.seed << '\n';
  os << "#unit\tnats\n";
  return os.str();
}

JointReport parse_joint_tsv(const std::string& text) {
  JointReport report;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t columns = 0;
  std::string cut_name;
  auto fail = [&](const std::string& what) { data_error("joint report line " + std::to_string(lineno) + ": " + what); };
  auto number = [&](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::logic_error&) {
      fail("non-numeric cell '" + s + "'");
    }
    return 0.0;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, '\t');
    if (lineno == 1) {
      if (cells.size() < 4 || cells[0] != "symptom" || cells[cells.size() - 2] != "MI" || cells.back() != "CIC")
        fail("bad header");
      columns = cells.size() - 3;
      const auto eq = cells[1].rfind("=s");
      if (eq == std::string::npos) fail("bad state label '" + cells[1] + "'");
      report.latent = cells[1].substr(0, eq);
      continue;
    }
    if (cells[0] == "#cut") {
      if (cells.size() < 2) fail("bad cut row");
      cut_name = cells[1];
      continue;
    }
    if (cells[0] == "#target") {
      if (cells.size() < 2) fail("bad target row");
      for (const auto& s : split(cells[1], ',')) report.target_states.push_back(static_cast<int>(number(s)));
      if (cells.size() > 2) report.target_label = cells[2];
      continue;
    }
    if (cells[0] == "#estimator") {
      report.exact = cells.size() > 1 && cells[1] == "exact";
      if (!report.exact) {
        if (cells.size() < 4) fail("bad estimator row");
        report.samples = static_cast<std::size_t>(std::stoull(cells[2]));
        report.seed = std::stoull(cells[3]);
      }
      continue;
    }
    if (cells[0] == "#unit") continue;
    if (cells.size() != columns + 3) fail("expected " + std::to_string(columns + 3) + " cells");
    if (cells[0] == "size") {
      for (std::size_t c = 1; c <= columns; ++c) report.sizes.push_back(number(cells[c]));
      continue;
    }
    JointRow row;
    row.symptom = cells[0];
    for (std::size_t c = 1; c <= columns; ++c) row.presence.push_back(number(cells[c]));
    row.mi = number(cells[columns + 1]);
    row.cic = number(cells[columns + 2]);
    report.rows.push_back(std::move(row));
  }
  if (columns == 0) data_error("joint report is empty");
  // The merged column is the last state column when a target is recorded.
  if (!report.target_states.empty()) {
    report.merged_size = report.sizes.back();
    report.sizes.pop_back();
    for (auto& row : report.rows) {
      row.merged = row.presence.back();
      row.presence.pop_back();
    }
  }
  report.cut = report.rows.size();
  for (std::size_t i = 0; i < report.rows.size(); ++i)
    if (report.rows[i].symptom == cut_name) report.cut = i;
  return report;
}

}  // namespace ltm
