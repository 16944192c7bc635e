#include "ltm/report.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <sstream>

#include "ltm/error.hpp"

namespace ltm {

namespace {

JointTable pair_joint(const LatentTreeModel& model, std::string_view a, std::string_view b) {
  const std::vector<std::string> names{std::string(a), std::string(b)};
  return marginal(model, names);
}

NodeId require_latent(const LatentTreeModel& model, std::string_view name) {
  const NodeId v = model.index(name);
  if (!model.is_latent(v)) data_error("'" + std::string(name) + "' is not a latent variable");
  return v;
}

std::string fmt(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

const char* to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::CoOccurrence: return "co-occurrence";
    case PatternKind::MutualExclusion: return "mutual-exclusion";
    case PatternKind::Mixed: return "mixed";
  }
  return "?";
}

std::string unit_name(double log_base) {
  if (std::fabs(log_base - kNaturalBase) < 1e-12) return "nats";
  if (log_base == 2.0) return "bits";
  return "log" + fmt(log_base, 6);
}

OccurrenceTable occurrence_table(const LatentTreeModel& model, std::string_view latent,
                                 std::span<const std::string> symptoms) {
  require_valid(model);
  const NodeId y = require_latent(model, latent);
  const auto k = static_cast<std::size_t>(model.cardinality(y));
  OccurrenceTable out;
  out.latent = std::string(latent);
  out.sizes = node_marginals(model)[static_cast<std::size_t>(y)];
  for (const auto& name : symptoms) {
    const NodeId x = model.index(name);
    if (model.is_latent(x)) data_error("'" + name + "' is not an observed variable");
    const auto kx = static_cast<std::size_t>(model.cardinality(x));
    const auto joint = pair_joint(model, latent, name);
    std::vector<double> presence(k, 0.0);
    for (std::size_t s = 0; s < k; ++s) {
      double total = 0.0;
      double present = 0.0;
      for (std::size_t t = 0; t < kx; ++t) {
        total += joint.values[s * kx + t];
        if (t != 0) present += joint.values[s * kx + t];
      }
      presence[s] = total > 0.0 ? present / total : 0.0;
    }
    out.symptoms.push_back(name);
    out.presence.push_back(std::move(presence));
  }
  return out;
}

double mutual_info(const LatentTreeModel& model, std::string_view a, std::string_view b, double log_base) {
  const auto joint = pair_joint(model, a, b);
  const auto ka = static_cast<std::size_t>(joint.cardinalities[0]);
  const auto kb = static_cast<std::size_t>(joint.cardinalities[1]);
  std::vector<double> pa(ka, 0.0);
  std::vector<double> pb(kb, 0.0);
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j) {
      pa[i] += joint.values[i * kb + j];
      pb[j] += joint.values[i * kb + j];
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j) {
      const double p = joint.values[i * kb + j];
      if (p > 0.0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return std::max(0.0, mi) / std::log(log_base);
}

double presence_correlation(const LatentTreeModel& model, std::string_view a, std::string_view b) {
  const auto joint = pair_joint(model, a, b);
  const auto ka = static_cast<std::size_t>(joint.cardinalities[0]);
  const auto kb = static_cast<std::size_t>(joint.cardinalities[1]);
  double pa = 0.0, pb = 0.0, pab = 0.0;
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j) {
      const double p = joint.values[i * kb + j];
      if (i != 0) pa += p;
      if (j != 0) pb += p;
      if (i != 0 && j != 0) pab += p;
    }
  const double var = pa * (1.0 - pa) * pb * (1.0 - pb);
  if (!(var > 0.0)) return 0.0;
  return (pab - pa * pb) / std::sqrt(var);
}

Pattern pattern_type(const LatentTreeModel& model, std::string_view latent) {
  require_valid(model);
  const NodeId y = require_latent(model, latent);
  struct Item {
    std::string name;
    double mi;
  };
  std::vector<Item> items;
  for (NodeId x : model.neighbors(y))
    if (!model.is_latent(x)) items.push_back({model.name(x), mutual_info(model, latent, model.name(x))});
  if (items.empty()) data_error("latent '" + std::string(latent) + "' has no adjacent observed variable");
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.mi > b.mi || (a.mi == b.mi && a.name < b.name); });

  const std::size_t n = items.size();
  std::vector<int> sign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double rho = presence_correlation(model, items[i].name, items[j].name);
      const int s = rho >= kZeroCorrelation ? 1 : (rho <= -kZeroCorrelation ? -1 : 0);
      sign[i * n + j] = sign[j * n + i] = s;
    }

  // Positive correlation keeps two symptoms in one group, negative separates them.
  std::vector<int> color(n, -1);
  std::vector<std::size_t> via(n, n);
  std::optional<std::pair<std::size_t, std::size_t>> clash;
  for (std::size_t start = 0; start < n; ++start) {
    if (color[start] >= 0) continue;
    color[start] = 0;
    std::queue<std::size_t> q;
    q.push(start);
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      for (std::size_t j = 0; j < n; ++j) {
        const int s = sign[i * n + j];
        if (s == 0 || i == j) continue;
        const int want = s > 0 ? color[i] : 1 - color[i];
        if (color[j] < 0) {
          color[j] = want;
          via[j] = i;
          q.push(j);
        } else if (color[j] != want && !clash) {
          clash = std::make_pair(i, j);
        }
      }
    }
  }

  Pattern out;
  for (std::size_t i = 0; i < n; ++i) (color[i] == 0 ? out.group_a : out.group_b).push_back(items[i].name);
  if (clash) {
    out.kind = PatternKind::Mixed;
    std::array<std::size_t, 3> triple{clash->first, clash->second, via[clash->first]};
    bool found = false;
    for (std::size_t i = 0; i < n && !found; ++i)
      for (std::size_t j = i + 1; j < n && !found; ++j)
        for (std::size_t k = j + 1; k < n && !found; ++k) {
          const int prod = sign[i * n + j] * sign[j * n + k] * sign[i * n + k];
          if (prod < 0) {
            triple = {i, j, k};
            found = true;
          }
        }
    for (std::size_t t = 0; t < 3; ++t) out.conflict[t] = triple[t] < n ? items[triple[t]].name : std::string();
  } else {
    out.kind = out.group_b.empty() ? PatternKind::CoOccurrence : PatternKind::MutualExclusion;
  }
  return out;
}

PartitionReport build_report(const LatentTreeModel& model, std::string_view latent, double log_base) {
  require_valid(model);
  const NodeId y = require_latent(model, latent);
  std::vector<std::string> symptoms;
  for (NodeId x : model.neighbors(y))
    if (!model.is_latent(x)) symptoms.push_back(model.name(x));

  const auto table = occurrence_table(model, latent, symptoms);
  PartitionReport report;
  report.latent = std::string(latent);
  report.sizes = table.sizes;
  report.log_base = log_base;
  for (std::size_t i = 0; i < symptoms.size(); ++i)
    report.rows.push_back({symptoms[i], table.presence[i], mutual_info(model, latent, symptoms[i], log_base)});
  std::sort(report.rows.begin(), report.rows.end(), [](const PartitionRow& a, const PartitionRow& b) {
    return a.mi > b.mi || (a.mi == b.mi && a.symptom < b.symptom);
  });
  if (!symptoms.empty()) report.pattern = pattern_type(model, latent);
  return report;
}

std::vector<EdgeStrength> edge_strengths(const LatentTreeModel& model, double log_base) {
  require_valid(model);
  std::vector<EdgeStrength> out;
  for (const auto& e : model.edges())
    out.push_back({model.name(e.a), model.name(e.b), mutual_info(model, model.name(e.a), model.name(e.b), log_base)});
  return out;
}

std::string format_report_tsv(const PartitionReport& report) {
  std::ostringstream os;
  os << "cluster";
  for (std::size_t s = 0; s < report.sizes.size(); ++s) os << '\t' << report.latent << "=s" << s;
  os << "\tMI\n";
  os << "size";
  for (double p : report.sizes) os << '\t' << fmt(p, 6);
  os << "\t\n";
  for (const auto& row : report.rows) {
    os << row.symptom;
    for (double p : row.presence) os << '\t' << fmt(p, 6);
    os << '\t' << fmt(row.mi, 6) << '\n';
  }
  os << "#pattern\t" << to_string(report.pattern.kind) << '\t' << join(report.pattern.group_a, ",");
  if (report.pattern.kind != PatternKind::CoOccurrence) os << '\t' << join(report.pattern.group_b, ",");
  if (report.pattern.kind == PatternKind::Mixed)
    os << '\t' << report.pattern.conflict[0] << ',' << report.pattern.conflict[1] << ',' << report.pattern.conflict[2];
  os << "\n#unit\t" << unit_name(report.log_base) << '\n';
  return os.str();
}

std::string format_report_text(const PartitionReport& report) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{""};
  for (std::size_t s = 0; s < report.sizes.size(); ++s)
    header.push_back(report.latent + "=s" + std::to_string(s) + " (" + fmt(report.sizes[s], 2) + ")");
  header.push_back("MI (" + unit_name(report.log_base) + ")");
  cells.push_back(header);
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.symptom};
    for (double p : row.presence) line.push_back(fmt(p, 2));
    line.push_back(fmt(row.mi, 2));
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  std::ostringstream os;
  os << "Partition given by " << report.latent << "\n";
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      os << line[c];
      if (c + 1 < line.size()) os << std::string(width[c] - line[c].size() + 2, ' ');
    }
    os << '\n';
  }
  const auto& p = report.pattern;
  os << "Pattern: " << to_string(p.kind);
  if (p.kind == PatternKind::CoOccurrence) os << " of " << join(p.group_a, ", ");
  else os << " between {" << join(p.group_a, ", ") << "} and {" << join(p.group_b, ", ") << "}";
  if (p.kind == PatternKind::Mixed) os << "; inconsistent signs among " << join({p.conflict.begin(), p.conflict.end()}, ", ");
  os << '\n';
  return os.str();
}

PartitionReport parse_report_tsv(const std::string& text) {
  PartitionReport report;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t states = 0;
  auto fail = [&](const std::string& what) { data_error("report line " + std::to_string(lineno) + ": " + what); };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, '\t');
    if (lineno == 1) {
      if (cells.size() < 3 || cells.front() != "cluster" || cells.back() != "MI") fail("bad header");
      states = cells.size() - 2;
      const auto& first = cells[1];
      const auto eq = first.rfind("=s");
      if (eq == std::string::npos) fail("bad cluster label '" + first + "'");
      report.latent = first.substr(0, eq);
      continue;
    }
    if (cells[0] == "#pattern") {
      if (cells.size() < 3) fail("bad pattern row");
      const std::string& kind = cells[1];
      if (kind == "co-occurrence") report.pattern.kind = PatternKind::CoOccurrence;
      else if (kind == "mutual-exclusion") report.pattern.kind = PatternKind::MutualExclusion;
      else if (kind == "mixed") report.pattern.kind = PatternKind::Mixed;
      else fail("unknown pattern '" + kind + "'");
      report.pattern.group_a = split(cells[2], ',');
      if (cells.size() > 3) report.pattern.group_b = split(cells[3], ',');
      if (cells.size() > 4) {
        auto c = split(cells[4], ',');
        for (std::size_t i = 0; i < 3 && i < c.size(); ++i) report.pattern.conflict[i] = c[i];
      }
      continue;
    }
    if (cells[0] == "#unit") {
      if (cells.size() < 2) fail("bad unit row");
      if (cells[1] == "nats") report.log_base = kNaturalBase;
      else if (cells[1] == "bits") report.log_base = 2.0;
      else if (cells[1].rfind("log", 0) == 0) report.log_base = std::stod(cells[1].substr(3));
      else fail("unknown unit '" + cells[1] + "'");
      continue;
    }
    if (cells.size() != states + 2) fail("expected " + std::to_string(states + 2) + " cells");
    try {
      if (cells[0] == "size") {
        for (std::size_t s = 0; s < states; ++s) report.sizes.push_back(std::stod(cells[s + 1]));
        continue;
      }
      PartitionRow row;
      row.symptom = cells[0];
      for (std::size_t s = 0; s < states; ++s) row.presence.push_back(std::stod(cells[s + 1]));
      row.mi = std::stod(cells[states + 1]);
      report.rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      fail("non-numeric cell");
    }
  }
  if (states == 0) data_error("report is empty");
  return report;
}

}  // namespace ltm
