#include "ltm/rule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ltm/error.hpp"
#include "parallel.hpp"

namespace ltm {

namespace {

constexpr std::size_t kChunk = 512;

std::string fmt(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double log2_ratio(double a, double b) { return std::log2(a) - std::log2(b); }

bool present(int value) { return value != kMissing && value != 0; }

// Weighted share of records where `agree` holds.
template <class Fn>
double weighted_share(const DataSet& data, Fn agree) {
  if (data.empty() || !(data.total_weight() > 0.0)) data_error("accuracy needs a nonempty dataset");
  double hit = 0.0;
  for (std::size_t r = 0; r < data.num_records(); ++r)
    if (agree(r)) hit += data.weight(r);
  return hit / data.total_weight();
}

template <class T, class Fn>
std::vector<T> chunked(std::size_t n, int threads, Fn fn) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  auto parts = detail::parallel_map(chunks, threads, [&](std::size_t c) {
    std::vector<T> out;
    fn(c * kChunk, std::min(n, (c + 1) * kChunk), out);
    return out;
  });
  std::vector<T> all;
  all.reserve(n);
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

}  // namespace

double presence_score(double p_target, double p_complement) {
  return log2_ratio(p_target, 1.0 - p_target) - log2_ratio(p_complement, 1.0 - p_complement);
}

double absence_term(double p_target, double p_complement) { return log2_ratio(1.0 - p_target, 1.0 - p_complement); }

ClassificationRule derive_rule(const ClassSummary& summary) {
  if (!(summary.prior_target > 0.0 && summary.prior_target < 1.0 && summary.prior_complement > 0.0 &&
        summary.prior_complement < 1.0))
    data_error("class prior is degenerate: P(target) = " + shortest(summary.prior_target));
  if (!(summary.smoothing >= 0.0)) usage_error("smoothing must be nonnegative");

  struct Keyed {
    RuleEntry entry;
    double key;
    double mi;
  };
  std::vector<Keyed> keyed;
  double threshold = log2_ratio(summary.prior_complement, summary.prior_target);
  for (const auto& s : summary.symptoms) {
    const double score = presence_score(s.p_target, s.p_complement);
    const double absent = absence_term(s.p_target, s.p_complement);
    if (!std::isfinite(score) || !std::isfinite(absent))
      numerical_error("score of '" + s.name + "' is infinite; a conditional probability is 0 or 1 (use smoothing > 0)");
    threshold -= absent;
    keyed.push_back({{s.name, score}, score * s.p_marginal, s.mi});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key > b.key;
    if (a.mi != b.mi) return a.mi > b.mi;
    return a.entry.symptom < b.entry.symptom;
  });

  ClassificationRule rule;
  for (auto& k : keyed) rule.entries.push_back(std::move(k.entry));
  rule.threshold = threshold;
  rule.smoothing = summary.smoothing;
  rule.latent = summary.latent;
  rule.target_label = summary.target_label;
  rule.target_states = summary.target_states;
  return rule;
}

RuleDecision apply_rule(const ClassificationRule& rule, const Evidence& record) {
  RuleDecision d;
  for (const auto& e : rule.entries) {
    auto it = record.find(e.symptom);
    if (it != record.end() && present(it->second)) d.total += e.score;
  }
  d.target = d.total > rule.threshold;
  return d;
}

std::vector<RuleDecision> classify_records(const ClassificationRule& rule, const DataSet& data,
                                           std::vector<std::string>* warnings, int threads) {
  std::vector<std::pair<std::size_t, double>> columns;
  for (const auto& e : rule.entries) {
    if (auto col = data.column(e.symptom)) columns.emplace_back(*col, e.score);
    else if (warnings) warnings->push_back("rule symptom '" + e.symptom + "' is not in the data; treated as absent");
  }
  return chunked<RuleDecision>(data.num_records(), threads, [&](std::size_t lo, std::size_t hi, auto& out) {
    for (std::size_t r = lo; r < hi; ++r) {
      RuleDecision d;
      for (const auto& [col, score] : columns)
        if (present(data.value(r, col))) d.total += score;
      d.target = d.total > rule.threshold;
      out.push_back(d);
    }
  });
}

bool model_classify(const LatentTreeModel& model, std::string_view latent, std::span<const int> target_states,
                    const Evidence& record) {
  const auto post = posterior(model, record, latent);
  std::vector<char> in(post.size(), 0);
  for (int s : target_states) {
    if (s < 0 || static_cast<std::size_t>(s) >= post.size()) usage_error("target state out of range");
    in[static_cast<std::size_t>(s)] = 1;
  }
  double t = 0.0, c = 0.0;
  for (std::size_t s = 0; s < post.size(); ++s) (in[s] ? t : c) += post[s];
  return t > c;
}

std::vector<ModelDecision> model_decisions(const LatentTreeModel& model, std::string_view latent,
                                           std::span<const int> target_states, const DataSet& data, int threads) {
  require_valid(model);
  const NodeId z = model.index(latent);
  if (!model.is_latent(z)) data_error("'" + std::string(latent) + "' is not a latent variable");
  std::vector<char> in(static_cast<std::size_t>(model.cardinality(z)), 0);
  for (int s : target_states) {
    if (s < 0 || static_cast<std::size_t>(s) >= in.size()) usage_error("target state out of range");
    in[static_cast<std::size_t>(s)] = 1;
  }
  DataBinding binding(model, data, true);
  return chunked<ModelDecision>(data.num_records(), threads, [&](std::size_t lo, std::size_t hi, auto& out) {
    TreePropagator prop(model);
    std::vector<int> states(model.size());
    for (std::size_t r = lo; r < hi; ++r) {
      binding.fill(r, states);
      if (prop.propagate(states, true) == kNegInf)
        numerical_error("record " + std::to_string(r + 1) + " has probability zero under the model");
      const auto post = prop.node_posterior(z);
      double t = 0.0, c = 0.0;
      for (std::size_t s = 0; s < post.size(); ++s) (in[s] ? t : c) += post[s];
      out.push_back({t > c, t / (t + c)});
    }
  });
}

double rule_accuracy(const ClassificationRule& rule, const LatentTreeModel& model, std::string_view latent,
                     std::span<const int> target_states, const DataSet& data, int threads) {
  if (data.empty()) data_error("accuracy needs a nonempty dataset");
  const auto by_rule = classify_records(rule, data, nullptr, threads);
  const auto by_model = model_decisions(model, latent, target_states, data, threads);
  return weighted_share(data, [&](std::size_t r) { return by_rule[r].target == by_model[r].target; });
}

SimplificationSweep simplify_sweep(const ClassificationRule& rule, const ClassSummary& summary,
                                   const LatentTreeModel& model, const DataSet& data, int threads) {
  if (data.empty()) data_error("accuracy needs a nonempty dataset");
  const auto by_model = model_decisions(model, summary.latent, summary.target_states, data, threads);

  const std::size_t n = rule.entries.size();
  std::vector<double> absent(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = std::find_if(summary.symptoms.begin(), summary.symptoms.end(),
                           [&](const SymptomSummary& s) { return s.name == rule.entries[i].symptom; });
    if (it == summary.symptoms.end())
      data_error("rule symptom '" + rule.entries[i].symptom + "' is not in the model");
    absent[i] = absence_term(it->p_target, it->p_complement);
  }

  SimplificationSweep sweep;
  double threshold = rule.threshold;
  for (std::size_t kept = n; kept >= 1; --kept) {
    ClassificationRule prefix = rule;
    prefix.entries.resize(kept);
    prefix.threshold = threshold;
    const auto by_rule = classify_records(prefix, data, nullptr, threads);
    const double acc = weighted_share(data, [&](std::size_t r) { return by_rule[r].target == by_model[r].target; });
    sweep.rows.push_back({kept, rule.entries[kept - 1].symptom, rule.entries[kept - 1].score, threshold, acc});
    threshold += absent[kept - 1];
  }
  std::reverse(sweep.rows.begin(), sweep.rows.end());
  sweep.baseline = sweep.rows.empty() ? 0.0 : sweep.rows.back().accuracy;
  return sweep;
}

ClassificationRule integerize(const ClassificationRule& rule, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) usage_error("scale must be positive");
  ClassificationRule out = rule;
  for (auto& e : out.entries) e.score = std::round(scale * e.score);
  out.threshold = std::round(scale * rule.threshold);
  out.scale = scale * rule.scale.value_or(1.0);
  return out;
}

double decision_agreement(const ClassificationRule& a, const ClassificationRule& b, const DataSet& data) {
  const auto da = classify_records(a, data);
  const auto db = classify_records(b, data);
  return weighted_share(data, [&](std::size_t r) { return da[r].target == db[r].target; });
}

std::string format_rule_tsv(const ClassificationRule& rule) {
  std::ostringstream os;
  os << "symptom\tscore\n";
  for (const auto& e : rule.entries) os << e.symptom << '\t' << fmt(e.score, 6) << '\n';
  os << "#threshold\t" << fmt(rule.threshold, 6) << '\n';
  os << "#base\t" << shortest(rule.base) << '\n';
  os << "#smoothing\t" << shortest(rule.smoothing) << '\n';
  if (rule.scale) os << "#scale\t" << shortest(*rule.scale) << '\n';
  if (!rule.latent.empty()) os << "#latent\t" << rule.latent << '\n';
  if (!rule.target_states.empty()) {
    os << "#target";
    for (std::size_t i = 0; i < rule.target_states.size(); ++i) os << (i ? ',' : '\t') << rule.target_states[i];
    if (!rule.target_label.empty()) os << '\t' << rule.target_label;
    os << '\n';
  }
  os << "#ordering\t" << rule.ordering << '\n';
  if (!rule.model_id.empty()) os << "#model\t" << rule.model_id << '\n';
  return os.str();
}

ClassificationRule parse_rule_tsv(const std::string& text) {
  ClassificationRule rule;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_threshold = false;
  std::set<std::string> seen;
  auto fail = [&](const std::string& what) { data_error("rule line " + std::to_string(lineno) + ": " + what); };
  auto number = [&](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("'" + s + "' is not a number");
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, '\t');
    if (lineno == 1) {
      if (cells.size() != 2 || cells[0] != "symptom" || cells[1] != "score") fail("expected header 'symptom<TAB>score'");
      continue;
    }
    if (cells.size() < 2) fail("expected two cells");
    const std::string& key = cells[0];
    if (key == "#threshold") {
      rule.threshold = number(cells[1]);
      have_threshold = true;
    } else if (key == "#base") {
      rule.base = number(cells[1]);
      if (rule.base != 2.0) fail("only base 2 rules are supported");
    } else if (key == "#smoothing") {
      rule.smoothing = number(cells[1]);
    } else if (key == "#scale") {
      rule.scale = number(cells[1]);
    } else if (key == "#latent") {
      rule.latent = cells[1];
    } else if (key == "#target") {
      for (const auto& s : split(cells[1], ',')) rule.target_states.push_back(static_cast<int>(number(s)));
      if (cells.size() > 2) rule.target_label = cells[2];
    } else if (key == "#ordering") {
      rule.ordering = cells[1];
    } else if (key == "#model") {
      rule.model_id = cells[1];
    } else if (key.starts_with("#")) {
      fail("unknown footer '" + key + "'");
    } else {
      if (cells.size() != 2) fail("expected two cells");
      if (!seen.insert(key).second) fail("symptom '" + key + "' is listed twice");
      rule.entries.push_back({key, number(cells[1])});
    }
  }
  if (lineno == 0) data_error("rule file is empty");
  if (!have_threshold) data_error("rule file has no #threshold row");
  return rule;
}

std::string format_sweep_tsv(const SimplificationSweep& sweep) {
  std::ostringstream os;
  os << "symptom\tscore\tthreshold\taccuracy\n";
  for (const auto& row : sweep.rows)
    os << row.symptom << '\t' << fmt(row.score, 6) << '\t' << fmt(row.threshold, 6) << '\t' << fmt(row.accuracy, 6)
       << '\n';
  os << "#baseline\t" << fmt(sweep.baseline, 6) << '\n';
  return os.str();
}

SimplificationSweep parse_sweep_tsv(const std::string& text) {
  SimplificationSweep sweep;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { data_error("sweep line " + std::to_string(lineno) + ": " + what); };
  auto number = [&](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("'" + s + "' is not a number");
    return v;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, '\t');
    if (lineno == 1) {
      if (line != "symptom\tscore\tthreshold\taccuracy") fail("bad header");
      continue;
    }
    if (cells[0] == "#baseline") {
      if (cells.size() != 2) fail("bad baseline row");
      sweep.baseline = number(cells[1]);
      continue;
    }
    if (cells.size() != 4) fail("expected four cells");
    sweep.rows.push_back(
        {sweep.rows.size() + 1, cells[0], number(cells[1]), number(cells[2]), number(cells[3])});
  }
  if (lineno == 0) data_error("sweep file is empty");
  return sweep;
}

}  // namespace ltm
