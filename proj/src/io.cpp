#include "ltm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ltm/error.hpp"

namespace ltm {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) { data_error(path + ": " + what); }

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing");
  return *it;
}

std::string string_field(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_string()) schema_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

int int_value(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected an integer");
  return v.get<int>();
}

const json& array_field(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_array()) schema_error(path + "." + key, "expected an array");
  return v;
}

}  // namespace

DataSet parse_dataset_csv(std::string_view text, bool dedupe, const std::string& source) {
  std::vector<std::string> header;
  std::vector<int> values;
  std::vector<double> weights;
  std::optional<std::size_t> weight_col;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool have_header = false;
  auto fail = [&](const std::string& what) { data_error(source + " line " + std::to_string(lineno) + ": " + what); };

  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (pos > text.size()) break;
      continue;
    }
    auto cells = split_csv_line(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].empty()) fail("empty column name in column " + std::to_string(c + 1));
        if (!seen.insert(cells[c]).second) fail("duplicate column name '" + cells[c] + "'");
        if (cells[c] == kWeightColumn) weight_col = c;
        else header.push_back(cells[c]);
      }
      have_header = true;
      continue;
    }
    const std::size_t expected = header.size() + (weight_col ? 1 : 0);
    if (cells.size() != expected)
      fail("expected " + std::to_string(expected) + " cells, found " + std::to_string(cells.size()));
    double weight = 1.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      if (weight_col && c == *weight_col) {
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), weight);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
          fail("weight '" + cell + "' is not a number");
        if (!(weight > 0.0) || !std::isfinite(weight)) fail("weight must be positive");
        continue;
      }
      if (cell.empty()) {
        values.push_back(kMissing);
        continue;
      }
      int v = 0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || v < 0)
        fail("cell '" + cell + "' in column '" + (weight_col && c > *weight_col ? header[c - 1] : header[c]) +
             "' is not a nonnegative integer");
      values.push_back(v);
    }
    weights.push_back(weight);
  }
  if (!have_header) data_error(source + ": no header row");
  if (weights.empty()) data_error(source + ": no records");
  DataSet data(std::move(header), std::move(values), std::move(weights));
  return dedupe ? data.dedupe() : data;
}

DataSet read_dataset_csv(const std::string& path, bool dedupe) {
  return parse_dataset_csv(read_text_file(path), dedupe, path);
}

std::string format_dataset_csv(const DataSet& data) {
  bool weighted = false;
  for (double w : data.weights()) weighted = weighted || w != 1.0;
  std::string out;
  for (std::size_t c = 0; c < data.num_variables(); ++c) out += (c ? "," : "") + data.names()[c];
  if (weighted) out += std::string(data.num_variables() ? "," : "") + kWeightColumn;
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < data.num_records(); ++r) {
    for (std::size_t c = 0; c < data.num_variables(); ++c) {
      if (c) out += ',';
      if (data.value(r, c) != kMissing) out += std::to_string(data.value(r, c));
    }
    if (weighted) {
      auto res = std::to_chars(buf, buf + sizeof buf, data.weight(r));
      out += (data.num_variables() ? "," : "") + std::string(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

std::string model_to_json(const LatentTreeModel& model) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  json vars = json::array();
  for (const auto& v : model.variables())
    vars.push_back({{"name", v.name}, {"kind", v.latent() ? "latent" : "observed"}, {"cardinality", v.cardinality}});
  doc["variables"] = std::move(vars);
  json edges = json::array();
  for (const auto& e : model.edges()) edges.push_back({model.name(e.a), model.name(e.b)});
  doc["edges"] = std::move(edges);
  doc["root"] = model.root() == kNoNode ? std::string() : model.name(model.root());
  json cpts = json::array();
  for (NodeId v : model.preorder()) {
    const NodeId p = model.parent(v);
    json entry;
    entry["node"] = model.name(v);
    entry["parent"] = p == kNoNode ? json(nullptr) : json(model.name(p));
    entry["rows"] = p == kNoNode ? 1 : model.cardinality(p);
    entry["table"] = model.cpts()[static_cast<std::size_t>(v)];
    cpts.push_back(std::move(entry));
  }
  doc["cpts"] = std::move(cpts);
  return doc.dump(2) + "\n";
}

LatentTreeModel model_from_json(std::string_view text, bool strict) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    data_error(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("$", "expected an object");
  if (!doc.contains("format_version")) schema_error("$.format_version", "missing");
  const auto& version = doc["format_version"];
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion)
    data_error("unsupported model format_version " + version.dump() + " (this build reads version " +
               std::to_string(kModelFormatVersion) + ")");

  std::vector<Variable> vars;
  std::map<std::string, NodeId> ids;
  const auto& jvars = array_field(doc, "variables", "$");
  for (std::size_t i = 0; i < jvars.size(); ++i) {
    const std::string path = "$.variables[" + std::to_string(i) + "]";
    Variable v;
    v.name = string_field(jvars[i], "name", path);
    const std::string kind = string_field(jvars[i], "kind", path);
    if (kind == "latent") v.kind = VariableKind::Latent;
    else if (kind == "observed") v.kind = VariableKind::Observed;
    else schema_error(path + ".kind", "expected 'latent' or 'observed', got '" + kind + "'");
    v.cardinality = int_value(field(jvars[i], "cardinality", path), path + ".cardinality");
    if (!ids.emplace(v.name, static_cast<NodeId>(i)).second) schema_error(path + ".name", "duplicate name '" + v.name + "'");
    vars.push_back(std::move(v));
  }
  auto lookup = [&](const json& name, const std::string& path) {
    if (!name.is_string()) schema_error(path, "expected a variable name");
    auto it = ids.find(name.get<std::string>());
    if (it == ids.end()) schema_error(path, "unknown variable '" + name.get<std::string>() + "'");
    return it->second;
  };

  std::vector<Edge> edges;
  const auto& jedges = array_field(doc, "edges", "$");
  for (std::size_t i = 0; i < jedges.size(); ++i) {
    const std::string path = "$.edges[" + std::to_string(i) + "]";
    if (!jedges[i].is_array() || jedges[i].size() != 2) schema_error(path, "expected a pair of names");
    edges.push_back({lookup(jedges[i][0], path + "[0]"), lookup(jedges[i][1], path + "[1]")});
  }
  const NodeId root = lookup(field(doc, "root", "$"), "$.root");

  std::vector<std::vector<double>> cpts(vars.size());
  std::vector<std::optional<std::string>> parents(vars.size());
  std::vector<char> seen(vars.size(), 0);
  const auto& jcpts = array_field(doc, "cpts", "$");
  for (std::size_t i = 0; i < jcpts.size(); ++i) {
    const std::string path = "$.cpts[" + std::to_string(i) + "]";
    const NodeId v = lookup(field(jcpts[i], "node", path), path + ".node");
    if (seen[static_cast<std::size_t>(v)]) schema_error(path + ".node", "second table for '" + vars[v].name + "'");
    seen[static_cast<std::size_t>(v)] = 1;
    const auto& parent = field(jcpts[i], "parent", path);
    if (!parent.is_null()) parents[static_cast<std::size_t>(v)] = vars[lookup(parent, path + ".parent")].name;
    const auto& table = array_field(jcpts[i], "table", path);
    for (std::size_t k = 0; k < table.size(); ++k) {
      if (!table[k].is_number()) schema_error(path + ".table[" + std::to_string(k) + "]", "expected a number");
      cpts[static_cast<std::size_t>(v)].push_back(table[k].get<double>());
    }
  }

  LatentTreeModel model(std::move(vars), std::move(edges), root, std::move(cpts));
  if (!model.valid()) {
    if (!strict) return model;
    std::string msg = "invalid model";
    for (const auto& v : model.violations()) msg += "; " + v;
    data_error(msg);
  }
  for (std::size_t v = 0; v < model.size(); ++v) {
    const NodeId p = model.parent(static_cast<NodeId>(v));
    const std::optional<std::string> expected = p == kNoNode ? std::nullopt : std::optional(model.name(p));
    if (parents[v] != expected)
      data_error("table of '" + model.name(static_cast<NodeId>(v)) + "' is conditioned on " +
                 (parents[v] ? "'" + *parents[v] + "'" : std::string("nothing")) + " but the tree rooted at '" +
                 model.name(model.root()) + "' gives " + (expected ? "'" + *expected + "'" : std::string("nothing")));
  }
  return model;
}

FeatureGroupSpec spec_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    data_error(std::string("group spec is not valid JSON: ") + e.what());
  }
  FeatureGroupSpec spec;
  if (!doc.is_object()) schema_error("$", "expected an object");
  if (doc.contains("target_label")) {
    if (!doc["target_label"].is_string()) schema_error("$.target_label", "expected a string");
    spec.target_label = doc["target_label"].get<std::string>();
  }
  const auto& groups = array_field(doc, "groups", "$");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::string path = "$.groups[" + std::to_string(g) + "]";
    FeatureGroup group;
    group.label = string_field(groups[g], "label", path);
    const auto& symptoms = array_field(groups[g], "symptoms", path);
    for (std::size_t s = 0; s < symptoms.size(); ++s) {
      if (!symptoms[s].is_string()) schema_error(path + ".symptoms[" + std::to_string(s) + "]", "expected a string");
      group.symptoms.push_back(symptoms[s].get<std::string>());
    }
    if (groups[g].contains("cardinality")) {
      const auto& card = groups[g]["cardinality"];
      if (card.is_string() && card.get<std::string>() == "auto") group.cardinality = 0;
      else group.cardinality = int_value(card, path + ".cardinality");
      if (group.cardinality < 0) schema_error(path + ".cardinality", "must be positive or \"auto\"");
    }
    spec.groups.push_back(std::move(group));
  }
  const auto& range = array_field(doc, "z_cardinality_range", "$");
  for (std::size_t i = 0; i < range.size(); ++i)
    spec.z_cardinalities.push_back(int_value(range[i], "$.z_cardinality_range[" + std::to_string(i) + "]"));
  if (spec.z_cardinalities.empty()) schema_error("$.z_cardinality_range", "is empty");
  spec.check();
  return spec;
}

std::string spec_to_json(const FeatureGroupSpec& spec) {
  json doc;
  doc["target_label"] = spec.target_label;
  json groups = json::array();
  for (const auto& g : spec.groups) {
    json jg{{"label", g.label}, {"symptoms", g.symptoms}};
    jg["cardinality"] = g.cardinality == 0 ? json("auto") : json(g.cardinality);
    groups.push_back(std::move(jg));
  }
  doc["groups"] = std::move(groups);
  doc["z_cardinality_range"] = spec.z_cardinalities;
  return doc.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) data_error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) data_error("failed writing '" + path + "'");
}

std::string content_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ltm
