#include "ltm/ltm.h"

#include <cstdio>
#include <cstring>
#include <new>
#include <sstream>

#include "ltm/em.hpp"
#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "ltm/io.hpp"
#include "ltm/joint.hpp"
#include "ltm/report.hpp"
#include "ltm/rule.hpp"
#include "ltm/search.hpp"

struct ltm_model {
  ltm::LatentTreeModel model;
};
struct ltm_dataset {
  ltm::DataSet data;
};
struct ltm_rule {
  ltm::ClassificationRule rule;
};

namespace {

thread_local std::string g_error;
thread_local std::vector<std::string> g_warnings;

template <class Fn>
ltm_status guarded(Fn fn) {
  g_error.clear();
  g_warnings.clear();
  try {
    fn();
    return LTM_OK;
  } catch (const ltm::Error& e) {
    g_error = e.what();
    return static_cast<ltm_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return LTM_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return LTM_ERR_DATA;
  }
}

void require(const void* p, const char* what) {
  if (!p) ltm::usage_error(std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

std::string fmt(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

ltm::EmConfig em_config(const ltm_em_options* o) {
  ltm::EmConfig c;
  if (!o) return c;
  c.max_iterations = o->max_iterations;
  c.tolerance = o->tolerance;
  c.restarts = o->restarts;
  c.seed = o->seed;
  c.smoothing = o->smoothing;
  c.threads = o->threads;
  return c;
}

std::vector<int> states(const int* target, size_t n) {
  if (n && !target) ltm::usage_error("target states are null");
  return n ? std::vector<int>(target, target + n) : std::vector<int>{};
}

double base_or_nats(double base) { return base > 0.0 ? base : ltm::kNaturalBase; }

}  // namespace

extern "C" {

const char* ltm_version(void) { return "0.1.0"; }
const char* ltm_last_error(void) { return g_error.c_str(); }
size_t ltm_warning_count(void) { return g_warnings.size(); }
const char* ltm_warning(size_t index) { return index < g_warnings.size() ? g_warnings[index].c_str() : nullptr; }
void ltm_string_free(char* s) { std::free(s); }

ltm_status ltm_dataset_read_csv(const char* path, int dedupe, ltm_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ltm_dataset{ltm::read_dataset_csv(path, dedupe != 0)};
  });
}

ltm_status ltm_dataset_parse_csv(const char* text, int dedupe, ltm_dataset** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new ltm_dataset{ltm::parse_dataset_csv(text, dedupe != 0)};
  });
}

ltm_status ltm_dataset_to_csv(const ltm_dataset* data, char** out) {
  return guarded([&] {
    require(data, "dataset");
    put(out, ltm::format_dataset_csv(data->data));
  });
}

void ltm_dataset_free(ltm_dataset* data) { delete data; }
size_t ltm_dataset_num_records(const ltm_dataset* data) { return data ? data->data.num_records() : 0; }
size_t ltm_dataset_num_variables(const ltm_dataset* data) { return data ? data->data.num_variables() : 0; }
double ltm_dataset_total_weight(const ltm_dataset* data) { return data ? data->data.total_weight() : 0.0; }

ltm_status ltm_model_load(const char* path, ltm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ltm_model{ltm::model_from_json(ltm::read_text_file(path))};
  });
}

ltm_status ltm_model_from_json(const char* text, ltm_model** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new ltm_model{ltm::model_from_json(text)};
  });
}

ltm_status ltm_model_to_json(const ltm_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    put(out, ltm::model_to_json(model->model));
  });
}

ltm_status ltm_model_save(const ltm_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    ltm::write_text_file(path, ltm::model_to_json(model->model));
  });
}

void ltm_model_free(ltm_model* model) { delete model; }

size_t ltm_model_num_variables(const ltm_model* model) { return model ? model->model.size() : 0; }

const char* ltm_model_variable_name(const ltm_model* model, size_t index) {
  if (!model || index >= model->model.size()) return nullptr;
  return model->model.name(static_cast<ltm::NodeId>(index)).c_str();
}

int ltm_model_variable_is_latent(const ltm_model* model, size_t index) {
  if (!model || index >= model->model.size()) return 0;
  return model->model.is_latent(static_cast<ltm::NodeId>(index)) ? 1 : 0;
}

int ltm_model_variable_cardinality(const ltm_model* model, size_t index) {
  if (!model || index >= model->model.size()) return 0;
  return model->model.cardinality(static_cast<ltm::NodeId>(index));
}

long ltm_model_dimension(const ltm_model* model) {
  if (!model || !model->model.valid()) return -1;
  return ltm::dimension(model->model);
}

ltm_status ltm_model_validate_file(const char* path, char** report) {
  return guarded([&] {
    require(path, "path");
    const auto model = ltm::model_from_json(ltm::read_text_file(path), false);
    std::string text;
    for (const auto& v : ltm::validate(model)) text += v + "\n";
    put(report, text);
    if (!text.empty()) ltm::data_error("model has " + std::to_string(model.violations().size()) + " violation(s)");
  });
}

ltm_status ltm_model_reroot(const ltm_model* model, const char* root, ltm_model** out) {
  return guarded([&] {
    require(model, "model");
    require(root, "root");
    require(out, "out");
    *out = new ltm_model{ltm::reroot(model->model, root)};
  });
}

ltm_status ltm_model_sample(const ltm_model* model, size_t n, uint64_t seed, int include_latent, ltm_dataset** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new ltm_dataset{ltm::forward_sample(model->model, n, seed, include_latent != 0)};
  });
}

ltm_status ltm_model_loglik(const ltm_model* model, const ltm_dataset* data, double* loglik, double* bic) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    const double ll = ltm::dataset_loglik(model->model, data->data);
    if (loglik) *loglik = ll;
    if (bic) *bic = ltm::bic_score(ll, ltm::dimension(model->model), data->data.total_weight());
  });
}

void ltm_em_options_default(ltm_em_options* options) {
  if (!options) return;
  const ltm::EmConfig c;
  *options = {c.max_iterations, c.tolerance, c.restarts, c.seed, c.smoothing, c.threads};
}

void ltm_search_options_default(ltm_search_options* options) {
  if (!options) return;
  const ltm::SearchConfig c;
  ltm_em_options_default(&options->em);
  options->screening_iterations = c.screening_iterations;
  options->max_latent_cardinality = c.max_latent_cardinality;
  options->max_latent_count = c.max_latent_count;
  options->initial_max_cardinality = c.initial_max_cardinality;
}

ltm_status ltm_learn_lca(const ltm_dataset* data, const char* const* variables, size_t num_variables,
                         const int* cardinalities, size_t num_cardinalities, const ltm_em_options* options,
                         ltm_model** out, char** table) {
  return guarded([&] {
    require(data, "dataset");
    require(out, "out");
    std::vector<std::string> names;
    for (size_t i = 0; i < num_variables; ++i) names.emplace_back(variables[i]);
    const auto cards = states(cardinalities, num_cardinalities);
    const auto result = ltm::fit_lca(data->data, names, cards, em_config(options));
    std::ostringstream os;
    os << "cardinality\tloglik\tbic\tdimension\tselected\n";
    for (size_t i = 0; i < result.fits.size(); ++i)
      os << result.cardinalities[i] << '\t' << fmt(result.fits[i].loglik, 6) << '\t' << fmt(result.fits[i].bic, 6)
         << '\t' << ltm::dimension(result.fits[i].model) << '\t' << (i == result.selected ? 1 : 0) << '\n';
    put(table, os.str());
    *out = new ltm_model{result.best().model};
  });
}

ltm_status ltm_learn_ltm(const ltm_dataset* data, const ltm_search_options* options, ltm_model** out,
                         char** search_log) {
  return guarded([&] {
    require(data, "dataset");
    require(out, "out");
    ltm::SearchConfig config;
    if (options) {
      config.em = em_config(&options->em);
      config.seed = options->em.seed;
      config.screening_iterations = options->screening_iterations;
      config.max_latent_cardinality = options->max_latent_cardinality;
      config.max_latent_count = options->max_latent_count;
      config.initial_max_cardinality = options->initial_max_cardinality;
    }
    auto result = ltm::search(data->data, config);
    put(search_log, ltm::format_search_log(result));
    *out = new ltm_model{std::move(result.fit.model)};
    g_warnings = std::move(result.warnings);
  });
}

ltm_status ltm_report_partition(const ltm_model* model, const char* latent, double log_base, int format, char** out) {
  return guarded([&] {
    require(model, "model");
    require(latent, "latent");
    const auto report = ltm::build_report(model->model, latent, base_or_nats(log_base));
    put(out, format == 1 ? ltm::format_report_text(report) : ltm::format_report_tsv(report));
  });
}

ltm_status ltm_report_edges(const ltm_model* model, double log_base, char** out) {
  return guarded([&] {
    require(model, "model");
    const double base = base_or_nats(log_base);
    std::ostringstream os;
    os << "a\tb\tMI\n";
    for (const auto& e : ltm::edge_strengths(model->model, base)) os << e.a << '\t' << e.b << '\t' << fmt(e.mi, 6) << '\n';
    os << "#unit\t" << ltm::unit_name(base) << '\n';
    put(out, os.str());
  });
}

ltm_status ltm_joint_cluster(const ltm_dataset* data, const char* spec_json, const ltm_em_options* options,
                             ltm_model** out, char** table) {
  return guarded([&] {
    require(data, "dataset");
    require(spec_json, "spec");
    require(out, "out");
    const auto spec = ltm::spec_from_json(spec_json);
    auto fit = ltm::fit_joint(data->data, spec, em_config(options));
    put(table, ltm::format_joint_bic_table(fit));
    *out = new ltm_model{fit.best().model};
  });
}

ltm_status ltm_joint_report(const ltm_model* model, const char* latent, const int* target, size_t num_target,
                            const char* target_label, double smoothing, uint64_t seed, char** out) {
  return guarded([&] {
    require(model, "model");
    require(latent, "latent");
    const auto report = ltm::build_joint_report(model->model, latent, states(target, num_target),
                                                target_label ? target_label : "", smoothing, seed);
    put(out, ltm::format_joint_tsv(report));
  });
}

ltm_status ltm_rule_derive(const ltm_model* model, const char* latent, const int* target, size_t num_target,
                           const char* target_label, double smoothing, ltm_rule** out) {
  return guarded([&] {
    require(model, "model");
    require(latent, "latent");
    require(out, "out");
    auto summary = ltm::merge_summary(model->model, latent, states(target, num_target), smoothing);
    if (target_label) summary.target_label = target_label;
    auto rule = ltm::derive_rule(summary);
    rule.model_id = ltm::content_digest(ltm::model_to_json(model->model));
    *out = new ltm_rule{std::move(rule)};
  });
}

ltm_status ltm_rule_load(const char* path, ltm_rule** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ltm_rule{ltm::parse_rule_tsv(ltm::read_text_file(path))};
  });
}

ltm_status ltm_rule_parse(const char* text, ltm_rule** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new ltm_rule{ltm::parse_rule_tsv(text)};
  });
}

ltm_status ltm_rule_to_tsv(const ltm_rule* rule, char** out) {
  return guarded([&] {
    require(rule, "rule");
    put(out, ltm::format_rule_tsv(rule->rule));
  });
}

void ltm_rule_free(ltm_rule* rule) { delete rule; }

ltm_status ltm_rule_sweep(const ltm_rule* rule, const ltm_model* model, const ltm_dataset* data, int threads,
                          char** out) {
  return guarded([&] {
    require(rule, "rule");
    require(model, "model");
    require(data, "dataset");
    const auto& r = rule->rule;
    if (r.latent.empty() || r.target_states.empty())
      ltm::data_error("rule does not record its latent variable and target states");
    auto summary = ltm::merge_summary(model->model, r.latent, r.target_states, r.smoothing);
    put(out, ltm::format_sweep_tsv(ltm::simplify_sweep(r, summary, model->model, data->data, threads)));
  });
}

ltm_status ltm_rule_integerize(const ltm_rule* rule, double scale, const ltm_dataset* data, ltm_rule** out,
                               double* agreement) {
  return guarded([&] {
    require(rule, "rule");
    require(out, "out");
    auto integer = ltm::integerize(rule->rule, scale);
    if (data && agreement) *agreement = ltm::decision_agreement(rule->rule, integer, data->data);
    *out = new ltm_rule{std::move(integer)};
  });
}

ltm_status ltm_classify_rule(const ltm_rule* rule, const ltm_dataset* data, const ltm_model* model, int threads,
                             char** out, double* agreement) {
  return guarded([&] {
    require(rule, "rule");
    require(data, "dataset");
    const auto& r = rule->rule;
    std::vector<std::string> warnings;
    const auto decisions = ltm::classify_records(r, data->data, &warnings, threads);
    std::vector<ltm::ModelDecision> by_model;
    if (model) {
      if (r.latent.empty() || r.target_states.empty())
        ltm::data_error("rule does not record its latent variable and target states");
      by_model = ltm::model_decisions(model->model, r.latent, r.target_states, data->data, threads);
    }
    std::string csv = model ? "record,score,decision,model_decision\n" : "record,score,decision\n";
    double agree = 0.0;
    for (size_t i = 0; i < decisions.size(); ++i) {
      csv += std::to_string(i + 1) + ',' + fmt(decisions[i].total, 6) + ',' + (decisions[i].target ? '1' : '0');
      if (model) {
        csv += std::string(",") + (by_model[i].target ? '1' : '0');
        if (by_model[i].target == decisions[i].target) agree += data->data.weight(i);
      }
      csv += '\n';
    }
    if (model && agreement) {
      if (!(data->data.total_weight() > 0.0)) ltm::data_error("accuracy needs a nonempty dataset");
      *agreement = agree / data->data.total_weight();
    }
    put(out, csv);
    g_warnings = std::move(warnings);
  });
}

ltm_status ltm_classify_model(const ltm_model* model, const char* latent, const int* target, size_t num_target,
                              const ltm_dataset* data, int threads, char** out) {
  return guarded([&] {
    require(model, "model");
    require(latent, "latent");
    require(data, "dataset");
    const auto decisions =
        ltm::model_decisions(model->model, latent, states(target, num_target), data->data, threads);
    std::string csv = "record,p_target,decision\n";
    for (size_t i = 0; i < decisions.size(); ++i)
      csv += std::to_string(i + 1) + ',' + fmt(decisions[i].p_target, 6) + ',' + (decisions[i].target ? '1' : '0') + '\n';
    put(out, csv);
  });
}

}  // extern "C"
