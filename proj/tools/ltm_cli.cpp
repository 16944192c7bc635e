// Command-line front end; talks to the library only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ltm/ltm.h"

namespace {

using nlohmann::json;

struct Failure {
  int code;
  std::string message;
};

void check(ltm_status status) {
  for (size_t i = 0; i < ltm_warning_count(); ++i) std::cerr << "warning: " << ltm_warning(i) << '\n';
  if (status != LTM_OK) throw Failure{static_cast<int>(status), ltm_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{LTM_ERR_USAGE, message}; }

struct Text {
  char* p = nullptr;
  ~Text() { ltm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Model = Handle<ltm_model, ltm_model_free>;
using Data = Handle<ltm_dataset, ltm_dataset_free>;
using Rule = Handle<ltm_rule, ltm_rule_free>;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{LTM_ERR_DATA, "cannot write '" + path + "'"};
  out << text;
  if (!out) throw Failure{LTM_ERR_DATA, "failed writing '" + path + "'"};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{LTM_ERR_DATA, "cannot open '" + path + "'"};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// "1..5" or "1,2,4".
std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (hi < lo) usage(std::string(what) + " range '" + text + "' is empty");
      for (int k = lo; k <= hi; ++k) out.push_back(k);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    }
  } catch (const std::logic_error&) {
    usage(std::string("cannot parse ") + what + " '" + text + "'");
  }
  if (out.empty()) usage(std::string(what) + " is empty");
  return out;
}

double parse_base(const std::string& text) {
  if (text == "e" || text == "nats") return 0.0;
  if (text == "bits") return 2.0;
  try {
    std::size_t used = 0;
    const double b = std::stod(text, &used);
    if (used == text.size() && b > 0.0 && b != 1.0) return b;
  } catch (const std::logic_error&) {
  }
  usage("log base must be 'e', 'bits' or a positive number other than 1");
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// One manifest per artifact-producing command, next to its primary output.
struct Manifest {
  std::string command;
  std::string started = now_utc();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json config = json::object();
  std::uint64_t seed = 0;
  std::string path;

  void write() const {
    if (outputs.empty()) return;
    json doc;
    doc["command"] = command;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["config"] = config;
    doc["config_digest"] = fnv1a(config.dump());
    doc["seed"] = seed;
    doc["tool_version"] = ltm_version();
    doc["started"] = started;
    doc["finished"] = now_utc();
    write_file(path.empty() ? outputs.front() + ".manifest.json" : path, doc.dump(2) + "\n");
  }
};

struct EmFlags {
  ltm_em_options options{};
  EmFlags() { ltm_em_options_default(&options); }

  void add(CLI::App* cmd) {
    cmd->add_option("--restarts", options.restarts, "EM random restarts")->capture_default_str();
    cmd->add_option("--max-iter", options.max_iterations, "EM iteration cap")->capture_default_str();
    cmd->add_option("--tol", options.tolerance, "EM relative convergence tolerance")->capture_default_str();
    cmd->add_option("--em-smoothing", options.smoothing, "pseudo-count added in every M-step")->capture_default_str();
  }
  json to_json() const {
    return {{"restarts", options.restarts},
            {"max_iterations", options.max_iterations},
            {"tolerance", options.tolerance},
            {"em_smoothing", options.smoothing}};
  }
};

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string manifest;
  void add(CLI::App* cmd, bool with_seed = true) {
    if (with_seed) cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads; 0 uses every core")->capture_default_str();
    cmd->add_option("--manifest", manifest, "run manifest path (default: <output>.manifest.json)");
  }
};

void load_model(const std::string& path, Model& m) { check(ltm_model_load(path.c_str(), &m.p)); }
void load_data(const std::string& path, bool dedupe, Data& d) { check(ltm_dataset_read_csv(path.c_str(), dedupe, &d.p)); }

std::string model_json(const Model& m) {
  Text t;
  check(ltm_model_to_json(m.p, &t.p));
  return t.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent class and latent tree analysis of categorical survey data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ltm_version()));
  std::function<void()> action;
  Manifest manifest;
  Common common;

  // sample
  std::string s_model, s_out;
  std::size_t s_n = 1000;
  bool s_latent = false;
  auto* sample = app.add_subcommand("sample", "draw records from a model");
  sample->add_option("--model", s_model, "model JSON")->required();
  sample->add_option("-n,--records", s_n, "number of records")->capture_default_str();
  sample->add_option("--out", s_out, "output CSV")->required();
  sample->add_flag("--include-latent", s_latent, "also write latent columns");
  common.add(sample);
  sample->callback([&] {
    action = [&] {
      Model m;
      load_model(s_model, m);
      Data d;
      check(ltm_model_sample(m.p, s_n, common.seed, s_latent, &d.p));
      Text csv;
      check(ltm_dataset_to_csv(d.p, &csv.p));
      write_file(s_out, csv.str());
      manifest.inputs = {s_model};
      manifest.outputs = {s_out};
      manifest.config = {{"records", s_n}, {"include_latent", s_latent}};
    };
  });

  // learn-lca
  std::string l_data, l_out, l_table, l_cards = "1..5";
  std::vector<std::string> l_vars;
  bool l_dedupe = false;
  EmFlags l_em;
  auto* lca = app.add_subcommand("learn-lca", "fit latent class models and select the cardinality by BIC");
  lca->add_option("--data", l_data, "input CSV")->required();
  lca->add_option("--out", l_out, "output model JSON")->required();
  lca->add_option("--cards", l_cards, "latent cardinalities, e.g. 1..5 or 2,3")->capture_default_str();
  lca->add_option("--vars", l_vars, "variables to model (default: every column)")->delimiter(',');
  lca->add_option("--table", l_table, "BIC table TSV (default: <out>.bic.tsv)");
  lca->add_flag("--dedupe", l_dedupe, "collapse duplicate rows into weights");
  l_em.add(lca);
  common.add(lca);
  lca->callback([&] {
    action = [&] {
      Data d;
      load_data(l_data, l_dedupe, d);
      const auto cards = parse_int_list(l_cards, "cardinalities");
      std::vector<const char*> vars;
      for (const auto& v : l_vars) vars.push_back(v.c_str());
      l_em.options.seed = common.seed;
      l_em.options.threads = common.threads;
      Model m;
      Text table;
      check(ltm_learn_lca(d.p, vars.data(), vars.size(), cards.data(), cards.size(), &l_em.options, &m.p, &table.p));
      const std::string table_path = l_table.empty() ? l_out + ".bic.tsv" : l_table;
      write_file(l_out, model_json(m));
      write_file(table_path, table.str());
      std::cout << table.str();
      manifest.inputs = {l_data};
      manifest.outputs = {l_out, table_path};
      manifest.config = l_em.to_json();
      manifest.config["cards"] = cards;
      manifest.config["vars"] = l_vars;
      manifest.config["dedupe"] = l_dedupe;
    };
  });

  // learn-ltm
  std::string t_data, t_out, t_log;
  bool t_dedupe = false;
  ltm_search_options t_opts{};
  ltm_search_options_default(&t_opts);
  EmFlags t_em;
  auto* ltm_cmd = app.add_subcommand("learn-ltm", "search for a latent tree model by BIC");
  ltm_cmd->add_option("--data", t_data, "input CSV")->required();
  ltm_cmd->add_option("--out", t_out, "output model JSON")->required();
  ltm_cmd->add_option("--log", t_log, "search log TSV (default: <out>.search.tsv)");
  ltm_cmd->add_option("--screening-iter", t_opts.screening_iterations, "local EM iterations per candidate")
      ->capture_default_str();
  ltm_cmd->add_option("--max-card", t_opts.max_latent_cardinality, "largest latent cardinality")->capture_default_str();
  ltm_cmd->add_option("--max-latents", t_opts.max_latent_count, "most latent variables (0: number of observed)")
      ->capture_default_str();
  ltm_cmd->add_option("--initial-max-card", t_opts.initial_max_cardinality,
                      "largest cardinality tried for the starting LCM")
      ->capture_default_str();
  ltm_cmd->add_flag("--dedupe", t_dedupe, "collapse duplicate rows into weights");
  t_em.add(ltm_cmd);
  common.add(ltm_cmd);
  ltm_cmd->callback([&] {
    action = [&] {
      Data d;
      load_data(t_data, t_dedupe, d);
      t_opts.em = t_em.options;
      t_opts.em.seed = common.seed;
      t_opts.em.threads = common.threads;
      Model m;
      Text log;
      check(ltm_learn_ltm(d.p, &t_opts, &m.p, &log.p));
      const std::string log_path = t_log.empty() ? t_out + ".search.tsv" : t_log;
      write_file(t_out, model_json(m));
      write_file(log_path, log.str());
      std::cout << log.str();
      manifest.inputs = {t_data};
      manifest.outputs = {t_out, log_path};
      manifest.config = t_em.to_json();
      manifest.config["screening_iterations"] = t_opts.screening_iterations;
      manifest.config["max_latent_cardinality"] = t_opts.max_latent_cardinality;
      manifest.config["max_latent_count"] = t_opts.max_latent_count;
      manifest.config["initial_max_cardinality"] = t_opts.initial_max_cardinality;
      manifest.config["dedupe"] = t_dedupe;
    };
  });

  // report-partitions
  std::string r_model, r_dir, r_base = "e";
  std::vector<std::string> r_latents;
  auto* report = app.add_subcommand("report-partitions", "occurrence and MI tables for each latent variable");
  report->add_option("--model", r_model, "model JSON")->required();
  report->add_option("--out-dir", r_dir, "directory for <latent>.tsv / <latent>.txt / edges.tsv")->required();
  report->add_option("--latent", r_latents, "latent variables to report (default: all)")->delimiter(',');
  report->add_option("--base", r_base, "MI log base: e, bits or a number")->capture_default_str();
  common.add(report, false);
  report->callback([&] {
    action = [&] {
      Model m;
      load_model(r_model, m);
      const double base = parse_base(r_base);
      std::filesystem::create_directories(r_dir);
      auto latents = r_latents;
      if (latents.empty())
        for (size_t i = 0; i < ltm_model_num_variables(m.p); ++i)
          if (ltm_model_variable_is_latent(m.p, i)) latents.emplace_back(ltm_model_variable_name(m.p, i));
      manifest.inputs = {r_model};
      for (const auto& y : latents) {
        Text tsv, txt;
        check(ltm_report_partition(m.p, y.c_str(), base, 0, &tsv.p));
        check(ltm_report_partition(m.p, y.c_str(), base, 1, &txt.p));
        const auto stem = (std::filesystem::path(r_dir) / y).string();
        write_file(stem + ".tsv", tsv.str());
        write_file(stem + ".txt", txt.str());
        std::cout << txt.str() << '\n';
        manifest.outputs.push_back(stem + ".tsv");
        manifest.outputs.push_back(stem + ".txt");
      }
      Text edges;
      check(ltm_report_edges(m.p, base, &edges.p));
      const auto edge_path = (std::filesystem::path(r_dir) / "edges.tsv").string();
      write_file(edge_path, edges.str());
      manifest.outputs.push_back(edge_path);
      manifest.config = {{"latents", latents}, {"base", r_base}};
      if (common.manifest.empty()) common.manifest = (std::filesystem::path(r_dir) / "manifest.json").string();
    };
  });

  // joint-cluster
  std::string j_data, j_spec, j_out, j_table, j_report, j_target, j_label;
  double j_c = 1e-6;
  bool j_dedupe = false;
  EmFlags j_em;
  auto* joint = app.add_subcommand("joint-cluster", "fit a joint clustering model from feature groups");
  joint->add_option("--data", j_data, "input CSV")->required();
  joint->add_option("--spec", j_spec, "feature group spec JSON")->required();
  joint->add_option("--out", j_out, "output model JSON")->required();
  joint->add_option("--table", j_table, "BIC per Z cardinality (default: <out>.bic.tsv)");
  joint->add_option("--report", j_report, "occurrence / merged class / MI / CIC report (default: <out>.report.tsv)");
  joint->add_option("--target", j_target, "Z states to merge into the target class, e.g. 1,2");
  joint->add_option("--c", j_c, "smoothing constant for the merged column")->capture_default_str();
  joint->add_flag("--dedupe", j_dedupe, "collapse duplicate rows into weights");
  j_em.add(joint);
  common.add(joint);
  joint->callback([&] {
    action = [&] {
      Data d;
      load_data(j_data, j_dedupe, d);
      const std::string spec_text = read_file(j_spec);
      j_em.options.seed = common.seed;
      j_em.options.threads = common.threads;
      Model m;
      Text table;
      check(ltm_joint_cluster(d.p, spec_text.c_str(), &j_em.options, &m.p, &table.p));
      std::vector<int> target;
      if (!j_target.empty()) target = parse_int_list(j_target, "target states");
      try {
        j_label = json::parse(spec_text).value("target_label", "");
      } catch (const json::exception&) {
      }
      Text rep;
      check(ltm_joint_report(m.p, "Z", target.data(), target.size(), j_label.c_str(), j_c, common.seed, &rep.p));
      const std::string table_path = j_table.empty() ? j_out + ".bic.tsv" : j_table;
      const std::string report_path = j_report.empty() ? j_out + ".report.tsv" : j_report;
      write_file(j_out, model_json(m));
      write_file(table_path, table.str());
      write_file(report_path, rep.str());
      std::cout << table.str() << '\n' << rep.str();
      manifest.inputs = {j_data, j_spec};
      manifest.outputs = {j_out, table_path, report_path};
      manifest.config = j_em.to_json();
      manifest.config["target"] = target;
      manifest.config["c"] = j_c;
      manifest.config["dedupe"] = j_dedupe;
    };
  });

  // derive-rule
  std::string d_model, d_latent = "Z", d_target, d_label, d_out;
  double d_c = 1e-6;
  auto* derive = app.add_subcommand("derive-rule", "score-based classification rule for a target class");
  derive->add_option("--model", d_model, "model JSON")->required();
  derive->add_option("--latent", d_latent, "class variable")->capture_default_str();
  derive->add_option("--target", d_target, "target states, e.g. 1,2")->required();
  derive->add_option("--label", d_label, "name of the target class");
  derive->add_option("--c", d_c, "smoothing constant")->capture_default_str();
  derive->add_option("--out", d_out, "output rule TSV")->required();
  common.add(derive, false);
  derive->callback([&] {
    action = [&] {
      Model m;
      load_model(d_model, m);
      const auto target = parse_int_list(d_target, "target states");
      Rule r;
      check(ltm_rule_derive(m.p, d_latent.c_str(), target.data(), target.size(), d_label.c_str(), d_c, &r.p));
      Text tsv;
      check(ltm_rule_to_tsv(r.p, &tsv.p));
      write_file(d_out, tsv.str());
      std::cout << tsv.str();
      manifest.inputs = {d_model};
      manifest.outputs = {d_out};
      manifest.config = {{"latent", d_latent}, {"target", target}, {"label", d_label}, {"c", d_c}};
    };
  });

  // sweep-rule
  std::string w_rule, w_model, w_data, w_out;
  auto* sweep = app.add_subcommand("sweep-rule", "accuracy of the rule as trailing symptoms are removed");
  sweep->add_option("--rule", w_rule, "rule TSV")->required();
  sweep->add_option("--model", w_model, "model the rule was derived from")->required();
  sweep->add_option("--data", w_data, "records to evaluate on")->required();
  sweep->add_option("--out", w_out, "output sweep TSV")->required();
  common.add(sweep, false);
  sweep->callback([&] {
    action = [&] {
      Rule r;
      check(ltm_rule_load(w_rule.c_str(), &r.p));
      Model m;
      load_model(w_model, m);
      Data d;
      load_data(w_data, false, d);
      Text tsv;
      check(ltm_rule_sweep(r.p, m.p, d.p, common.threads, &tsv.p));
      write_file(w_out, tsv.str());
      std::cout << tsv.str();
      manifest.inputs = {w_rule, w_model, w_data};
      manifest.outputs = {w_out};
    };
  });

  // integerize-rule
  std::string i_rule, i_out, i_data;
  double i_scale = 10.0;
  auto* integerize = app.add_subcommand("integerize-rule", "scale and round a rule to integers");
  integerize->add_option("--rule", i_rule, "rule TSV")->required();
  integerize->add_option("--scale", i_scale, "scaling factor")->capture_default_str();
  integerize->add_option("--out", i_out, "output rule TSV")->required();
  integerize->add_option("--data", i_data, "records for the agreement report");
  common.add(integerize, false);
  integerize->callback([&] {
    action = [&] {
      Rule r;
      check(ltm_rule_load(i_rule.c_str(), &r.p));
      Data d;
      if (!i_data.empty()) load_data(i_data, false, d);
      Rule out;
      double agreement = 0.0;
      check(ltm_rule_integerize(r.p, i_scale, d.p, &out.p, &agreement));
      Text tsv;
      check(ltm_rule_to_tsv(out.p, &tsv.p));
      write_file(i_out, tsv.str());
      std::cout << tsv.str();
      if (d.p) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", agreement);
        std::cout << "agreement\t" << buf << '\n';
      }
      manifest.inputs = {i_rule};
      if (!i_data.empty()) manifest.inputs.push_back(i_data);
      manifest.outputs = {i_out};
      manifest.config = {{"scale", i_scale}};
    };
  });

  // classify
  std::string c_rule, c_model, c_data, c_out, c_latent = "Z", c_target;
  auto* classify = app.add_subcommand("classify", "classify records with a rule or a model");
  classify->add_option("--rule", c_rule, "rule TSV");
  classify->add_option("--model", c_model, "model JSON; with --rule, also reports agreement");
  classify->add_option("--data", c_data, "records to classify")->required();
  classify->add_option("--out", c_out, "decisions CSV")->required();
  classify->add_option("--latent", c_latent, "class variable for model-based classification")->capture_default_str();
  classify->add_option("--target", c_target, "target states for model-based classification");
  common.add(classify, false);
  classify->callback([&] {
    action = [&] {
      if (c_rule.empty() && c_model.empty()) usage("classify needs --rule or --model");
      Data d;
      load_data(c_data, false, d);
      Model m;
      if (!c_model.empty()) load_model(c_model, m);
      Text csv;
      manifest.inputs = {c_data};
      if (!c_rule.empty()) {
        Rule r;
        check(ltm_rule_load(c_rule.c_str(), &r.p));
        double agreement = 0.0;
        check(ltm_classify_rule(r.p, d.p, m.p, common.threads, &csv.p, &agreement));
        if (m.p) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.6f", agreement);
          std::cout << "accuracy\t" << buf << '\n';
        }
        manifest.inputs.push_back(c_rule);
      } else {
        if (c_target.empty()) usage("model-based classification needs --target");
        const auto target = parse_int_list(c_target, "target states");
        check(ltm_classify_model(m.p, c_latent.c_str(), target.data(), target.size(), d.p, common.threads, &csv.p));
        manifest.config = {{"latent", c_latent}, {"target", target}};
      }
      if (!c_model.empty()) manifest.inputs.push_back(c_model);
      write_file(c_out, csv.str());
      manifest.outputs = {c_out};
    };
  });

  // validate
  std::string v_model;
  auto* validate = app.add_subcommand("validate", "check a model file against the model invariants");
  validate->add_option("--model", v_model, "model JSON")->required();
  validate->callback([&] {
    action = [&] {
      Text report;
      const ltm_status status = ltm_model_validate_file(v_model.c_str(), &report.p);
      std::cout << report.str();
      if (status == LTM_OK) std::cout << "valid\n";
      check(status);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return LTM_ERR_USAGE;
  }

  try {
    for (auto* sub : app.get_subcommands()) manifest.command = sub->get_name();
    manifest.seed = common.seed;
    action();
    manifest.config["threads"] = common.threads;
    manifest.path = common.manifest;
    manifest.write();
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return LTM_ERR_DATA;
  }
  return 0;
}
