// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "ltm/em.hpp"
#include "ltm/inference.hpp"
#include "ltm/io.hpp"
#include "ltm/joint.hpp"
#include "ltm/report.hpp"
#include "ltm/rule.hpp"
#include "ltm/search.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

namespace fs = std::filesystem;
using namespace ltm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Partition-table MI within 0.01.
Outcome mi_golden() {
  double worst = 0.0;
  int rows = 0;
  for (const auto& t : oracle::partition_tables()) {
    const auto m = t.model();
    for (const auto& row : t.rows) {
      worst = std::max(worst, std::fabs(mutual_info(m, t.latent, row.symptom) - row.mi));
      ++rows;
    }
  }
  return {worst <= 0.01, fmt("%d rows, max |dMI| = %.4f nats", rows, worst)};
}

// Merged s1+s2 column within 0.01.
Outcome merge_golden() {
  const std::vector<int> s12{1, 2};
  const auto summary = merge_summary(oracle::joint_table_model(), "Z", s12);
  const auto rows = oracle::joint_table();
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    worst = std::max(worst, std::fabs(summary.symptoms[i].p_target - rows[i].merged));
  return {worst <= 0.01 && rows.size() == 7, fmt("7 rows, max |dp| = %.4f, P(s12) = %.2f", worst, summary.prior_target)};
}

// Printed scores within 0.25; the worked example within 0.1.
Outcome score_golden() {
  const std::vector<int> s12{1, 2};
  const auto rule = derive_rule(merge_summary(oracle::joint_table_model(), "Z", s12));
  double worst = 0.0;
  for (const auto& [name, printed] : oracle::printed_scores())
    for (const auto& e : rule.entries)
      if (e.symptom == name) worst = std::max(worst, std::fabs(e.score - printed));
  const double worked = std::fabs(std::log2(4.0 / 0.03) - 7.1);
  return {worst <= 0.25 && worked <= 0.1, fmt("max |dscore| = %.3f, worked example off by %.3f", worst, worked)};
}

// Rule vs model decisions on every complete record of 200 true binary-Z LCMs.
Outcome exactness() {
  Rng rng(substream(1, 4));
  const std::vector<int> t{1};
  long records = 0, disagree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    const auto m = oracle::random_binary_lcm(rng, n);
    const auto rule = derive_rule(merge_summary(m, "Z", t, 0.0));
    std::vector<std::string> names;
    for (NodeId x : m.observed()) names.push_back(m.name(x));
    for (unsigned code = 0; code < (1U << n); ++code) {
      Evidence ev;
      for (int i = 0; i < n; ++i) ev[names[static_cast<std::size_t>(i)]] = static_cast<int>((code >> i) & 1U);
      if (apply_rule(rule, ev).target != model_classify(m, "Z", t, ev)) ++disagree;
      ++records;
    }
  }
  return {disagree == 0, fmt("200 models, %ld records, %ld disagreements", records, disagree)};
}

// Non-decreasing EM traces over 1000 fits.
Outcome em_monotone() {
  Rng rng(substream(1, 5));
  int bad = 0;
  long iterations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto truth = oracle::random_model(rng, 3 + static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(2)),
                                            3, 2 + static_cast<int>(rng.below(2)));
    const auto data = forward_sample(truth, 40 + rng.below(120), substream(2, 5, static_cast<std::uint64_t>(trial)));
    const auto init = random_parameters(truth, rng);
    EmConfig c;
    c.max_iterations = 40;
    c.tolerance = 1e-15;
    c.smoothing = trial % 3 == 0 ? 0.5 : 0.0;
    const auto fit = run_em(init, data, c);
    for (std::size_t i = 1; i < fit.trace.size(); ++i)
      if (fit.trace[i] < fit.trace[i - 1] - 1e-9) {
        ++bad;
        break;
      }
    iterations += static_cast<long>(fit.trace.size());
  }
  return {bad == 0, fmt("1000 fits, %ld iterations, %d decreasing traces", iterations, bad)};
}

// record_loglik, posterior, MI and CIC against full enumeration.
Outcome inference_oracle() {
  Rng rng(substream(1, 6));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int latents = 1 + static_cast<int>(rng.below(3));
    const int observed = 3 + static_cast<int>(rng.below(static_cast<std::size_t>(10 - latents)));
    const auto m = oracle::random_model(rng, observed, latents, 2, 2);
    const auto joint = oracle::full_joint(m);
    for (int k = 0; k < 10; ++k) {
      const auto states = oracle::random_evidence(rng, m);
      const auto ev = oracle::to_evidence(m, states);
      worst = std::max(worst, std::fabs(record_loglik(m, ev) - std::log(oracle::brute_prob(joint, states))));
      for (NodeId h : m.latents()) {
        const auto got = posterior(m, ev, m.name(h));
        const auto want = oracle::brute_posterior(joint, states, h);
        for (std::size_t s = 0; s < got.size(); ++s) worst = std::max(worst, std::fabs(got[s] - want[s]));
      }
    }
    const NodeId z = m.latents()[0];
    std::vector<std::string> names;
    for (NodeId x : m.observed()) {
      names.push_back(m.name(x));
      worst = std::max(worst, std::fabs(mutual_info(m, m.name(z), m.name(x)) - oracle::brute_mi(joint, {z}, {x})));
    }
    const double total = oracle::brute_mi(joint, {z}, m.observed());
    worst = std::max(worst, std::fabs(joint_mutual_info(m, m.name(z), names) - total));
    const auto cic = cic_table(m, m.name(z), names);
    std::vector<NodeId> prefix;
    for (const auto& row : cic.rows) {
      prefix.push_back(m.index(row.symptom));
      if (total > 0) worst = std::max(worst, std::fabs(row.cic - oracle::brute_mi(joint, {z}, prefix) / total));
    }
  }
  return {worst <= 1e-9, fmt("100 models, max deviation %.2e", worst)};
}

// Reroot invariance of record_loglik.
Outcome reroot_invariance() {
  Rng rng(substream(1, 7));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_model(rng, 4 + static_cast<int>(rng.below(6)), 2 + static_cast<int>(rng.below(3)), 3, 3);
    const auto latents = m.latents();
    const auto r = reroot(m, m.name(latents[rng.below(latents.size())]));
    for (int k = 0; k < 100; ++k) {
      const auto ev = oracle::to_evidence(m, oracle::random_evidence(rng, m));
      worst = std::max(worst, std::fabs(record_loglik(m, ev) - record_loglik(r, ev)));
    }
  }
  return {worst <= 1e-9, fmt("100 models x 100 records, max |dll| = %.2e", worst)};
}

// fit_lca cardinality selection on 20 seeds each.
Outcome lca_recovery() {
  const std::vector<int> cards{1, 2, 3, 4};
  int separated = 0, independent = 0;
  EmConfig c;
  c.restarts = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    const auto a = fit_lca(forward_sample(gen::separated_lcm(6), 5000, substream(seed, 8, 0)), {}, cards, c);
    if (a.cardinalities[a.selected] == 2) ++separated;
    const auto b = fit_lca(forward_sample(gen::independent_columns(6), 5000, substream(seed, 8, 1)), {}, cards, c);
    if (b.cardinalities[b.selected] == 1) ++independent;
  }
  return {separated >= 18 && independent >= 18,
          fmt("separated -> 2 in %d/20, independent -> 1 in %d/20", separated, independent)};
}

bool islands_recovered(const LatentTreeModel& m) {
  if (m.latents().size() != 2) return false;
  std::set<std::set<std::string>> groups;
  for (NodeId h : m.latents()) {
    std::set<std::string> leaves;
    for (NodeId v : m.neighbors(h))
      if (!m.is_latent(v)) leaves.insert(m.name(v));
    groups.insert(leaves);
  }
  const auto a = gen::island('A'), b = gen::island('B');
  return groups == std::set<std::set<std::string>>{{a.begin(), a.end()}, {b.begin(), b.end()}};
}

// Two-island structure search on 20 seeds.
Outcome structure_recovery() {
  int recovered = 0, improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = forward_sample(gen::two_islands(), 5000, substream(seed, 9));
    SearchConfig c;
    c.seed = seed;
    c.em.seed = seed;
    c.em.restarts = 4;
    const auto r = search(data, c);
    if (islands_recovered(r.fit.model)) ++recovered;
    if (r.fit.bic >= r.initial_bic) ++improved;
  }
  return {recovered >= 16 && improved == 20,
          fmt("exact partition in %d/20, BIC(final) >= BIC(initial) in %d/20", recovered, improved)};
}

// Prefix rule accuracy and integerization on the joint-shaped generator.
Outcome pipeline_simplification() {
  const auto g = gen::vmci_like();
  const std::vector<int> s12{1, 2};
  const auto data = forward_sample(g.model, 5000, substream(1, 10));
  const auto summary = merge_summary(g.model, "Z", s12);
  const auto rule = derive_rule(summary);
  const auto sweep = simplify_sweep(rule, summary, g.model, data);
  const auto& eight = sweep.rows[7];
  const double gap = std::fabs(sweep.baseline - eight.accuracy);
  std::string flips;
  bool unchanged = true;
  for (double scale : {100.0, 1000.0}) {
    const auto integer = integerize(rule, scale);
    const auto a = classify_records(rule, data);
    const auto b = classify_records(integer, data);
    int changed = 0;
    for (std::size_t r = 0; r < a.size(); ++r)
      if (a[r].target != b[r].target) ++changed;
    unchanged = unchanged && changed == 0;
    flips += fmt(", scale %g: %d changed", scale, changed);
  }
  return {eight.kept == 8 && gap <= 0.02 && unchanged,
          fmt("full %.4f, 8-prefix %.4f (gap %.4f)", sweep.baseline, eight.accuracy, gap) + flips};
}

int run(const std::string& args) {
  const std::string cmd = std::string(LTM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// CLI outputs byte-identical across --threads.
Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("ltm_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  const auto g = gen::vmci_like();
  write_text_file(p("truth.json"), model_to_json(g.model));
  write_text_file(p("spec.json"), spec_to_json(g.spec));
  write_text_file(p("islands.json"), model_to_json(gen::two_islands()));

  int commands = 0, differing = 0, failed = 0;
  std::string first_diff;
  auto check = [&](const std::string& name, const std::function<std::string(const std::string&, int)>& args,
                   const std::vector<std::string>& outputs) {
    ++commands;
    for (int threads : {1, 2, 4}) {
      const std::string tag = name + "_t" + std::to_string(threads);
      if (run(args(tag, threads) + " --threads " + std::to_string(threads)) != 0) {
        ++failed;
        return;
      }
    }
    for (const auto& suffix : outputs) {
      const auto ref = read_text_file(p(name + "_t1" + suffix));
      for (int threads : {2, 4})
        if (read_text_file(p(name + "_t" + std::to_string(threads) + suffix)) != ref) {
          ++differing;
          if (first_diff.empty()) first_diff = name + suffix;
        }
    }
  };

  if (run("sample --model " + p("truth.json") + " -n 1500 --seed 11 --out " + p("data.csv")) != 0 ||
      run("sample --model " + p("islands.json") + " -n 1500 --seed 12 --out " + p("islands.csv")) != 0)
    return {false, "sampling failed"};

  check("sample", [&](const std::string& t, int) { return "sample --model " + p("truth.json") + " -n 2000 --seed 5 --out " + p(t + ".csv"); },
        {".csv"});
  check("lca", [&](const std::string& t, int) {
    return "learn-lca --data " + p("data.csv") + " --cards 1..3 --restarts 6 --seed 5 --out " + p(t + ".json");
  }, {".json", ".json.bic.tsv"});
  check("ltm", [&](const std::string& t, int) {
    return "learn-ltm --data " + p("islands.csv") + " --restarts 3 --seed 5 --out " + p(t + ".json");
  }, {".json", ".json.search.tsv"});
  check("joint", [&](const std::string& t, int) {
    return "joint-cluster --data " + p("data.csv") + " --spec " + p("spec.json") + " --restarts 3 --seed 5 --target 1,2 --out " +
           p(t + ".json");
  }, {".json", ".json.bic.tsv", ".json.report.tsv"});
  check("report", [&](const std::string& t, int) { return "report-partitions --model " + p("truth.json") + " --out-dir " + p(t); },
        {"/Z.tsv", "/Z.txt", "/Sleep.tsv", "/edges.tsv"});
  check("derive", [&](const std::string& t, int) {
    return "derive-rule --model " + p("truth.json") + " --target 1,2 --out " + p(t + ".tsv");
  }, {".tsv"});
  if (run("derive-rule --model " + p("truth.json") + " --target 1,2 --out " + p("rule.tsv")) != 0) ++failed;
  check("integer", [&](const std::string& t, int) {
    return "integerize-rule --rule " + p("rule.tsv") + " --scale 100 --data " + p("data.csv") + " --out " + p(t + ".tsv");
  }, {".tsv"});
  check("posterior", [&](const std::string& t, int) {
    return "classify --model " + p("truth.json") + " --target 1,2 --data " + p("data.csv") + " --out " + p(t + ".csv");
  }, {".csv"});
  check("sweep", [&](const std::string& t, int) {
    return "sweep-rule --rule " + p("rule.tsv") + " --model " + p("truth.json") + " --data " + p("data.csv") + " --out " +
           p(t + ".tsv");
  }, {".tsv"});
  check("classify", [&](const std::string& t, int) {
    return "classify --rule " + p("rule.tsv") + " --model " + p("truth.json") + " --target 1,2 --data " + p("data.csv") +
           " --out " + p(t + ".csv");
  }, {".csv"});

  fs::remove_all(dir);
  return {failed == 0 && differing == 0,
          fmt("%d commands x threads {1,2,4}: %d failed, %d differing outputs%s%s", commands, failed, differing,
              first_diff.empty() ? "" : ", first ", first_diff.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"partition table MI", mi_golden},
      {"merged class column", merge_golden},
      {"rule scores", score_golden},
      {"rule/model exactness", exactness},
      {"EM monotonicity", em_monotone},
      {"inference oracle", inference_oracle},
      {"reroot invariance", reroot_invariance},
      {"LCA recovery", lca_recovery},
      {"structure recovery", structure_recovery},
      {"pipeline simplification", pipeline_simplification},
      {"CLI determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %2zu %s  %-24s %s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
