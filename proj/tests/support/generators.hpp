#pragma once
// Synthetic generators for recovery and pipeline checks.

#include <string>
#include <vector>

#include "ltm/joint.hpp"
#include "ltm/model.hpp"

namespace gen {

using ltm::LatentTreeModel;
using ltm::Variable;
using ltm::VariableKind;

// Well-separated latent class model: binary latent, n binary leaves with
// P(X=1|s0) = 0.15, P(X=1|s1) = 0.85.
inline LatentTreeModel separated_lcm(int n, double prior = 0.5) {
  std::vector<Variable> vars{{"C", VariableKind::Latent, 2}};
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<ltm::NamedCpt> cpts{{"C", {prior, 1.0 - prior}}};
  for (int i = 0; i < n; ++i) {
    const std::string name = "X" + std::to_string(i + 1);
    vars.push_back({name, VariableKind::Observed, 2});
    edges.emplace_back("C", name);
    cpts.push_back({name, {0.85, 0.15, 0.15, 0.85}});
  }
  return ltm::make_model(vars, edges, "C", cpts);
}

// Independent fair binary columns as an LCM with a one-state latent.
inline LatentTreeModel independent_columns(int n) {
  std::vector<Variable> vars{{"C", VariableKind::Latent, 1}};
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<ltm::NamedCpt> cpts{{"C", {1.0}}};
  for (int i = 0; i < n; ++i) {
    const std::string name = "X" + std::to_string(i + 1);
    vars.push_back({name, VariableKind::Observed, 2});
    edges.emplace_back("C", name);
    cpts.push_back({name, {0.5 + 0.04 * (i % 3), 0.5 - 0.04 * (i % 3)}});
  }
  return ltm::make_model(vars, edges, "C", cpts);
}

// Two linked binary latents, four binary leaves each. Leaves follow their
// latent with 0.85 / 0.15; the latents agree with probability 0.75.
inline LatentTreeModel two_islands() {
  std::vector<Variable> vars{{"U", VariableKind::Latent, 2}, {"V", VariableKind::Latent, 2}};
  std::vector<std::pair<std::string, std::string>> edges{{"U", "V"}};
  std::vector<ltm::NamedCpt> cpts{{"U", {0.5, 0.5}}, {"V", {0.75, 0.25, 0.25, 0.75}}};
  for (const char* island : {"A", "B"})
    for (int i = 1; i <= 4; ++i) {
      const std::string name = std::string(island) + std::to_string(i);
      vars.push_back({name, VariableKind::Observed, 2});
      edges.emplace_back(island[0] == 'A' ? "U" : "V", name);
      cpts.push_back({name, {0.85, 0.15, 0.15, 0.85}});
    }
  return ltm::make_model(vars, edges, "U", cpts);
}

inline std::vector<std::string> island(char prefix) {
  std::vector<std::string> out;
  for (int i = 1; i <= 4; ++i) out.push_back(std::string(1, prefix) + std::to_string(i));
  return out;
}

// Joint clustering shape with a three-state Z and sixteen binary symptoms:
// ten hang off Z directly, three pairs go through binary intermediates.
// Occurrence rates for the first seven follow the published joint table.
struct JointGenerator {
  ltm::FeatureGroupSpec spec;
  LatentTreeModel model;
};

inline JointGenerator vmci_like() {
  JointGenerator g;
  const std::vector<std::pair<std::string, std::vector<double>>> direct{
      {"greasy_fur", {0.03, 0.86, 0.60}},  {"sticky_mouth", {0.05, 0.18, 0.62}}, {"slippery_pulse", {0.27, 0.67, 0.39}},
      {"urinary", {0.17, 0.13, 0.65}},     {"dizzy_headache", {0.02, 0.01, 0.25}}, {"expectoration", {0.26, 0.20, 0.63}},
      {"dizziness", {0.45, 0.42, 0.80}},   {"thirst", {0.20, 0.28, 0.35}},     {"swathed_head", {0.10, 0.16, 0.22}},
      {"nausea", {0.08, 0.12, 0.20}},
  };
  struct Pair {
    std::string label;
    std::vector<double> mid;  // P(mid = 1 | Z = s)
    std::string a, b;
  };
  const std::vector<Pair> pairs{
      {"Tongue", {0.10, 0.55, 0.45}, "thick_fur", "fat_tongue"},
      {"Sleep", {0.35, 0.40, 0.45}, "insomnia", "dreamfulness"},
      {"Head", {0.15, 0.22, 0.40}, "distending_headache", "tooth_marked"},
  };

  std::vector<Variable> vars{{"Z", VariableKind::Latent, 3}};
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<ltm::NamedCpt> cpts{{"Z", {0.42, 0.44, 0.14}}};
  auto binary_rows = [](const std::vector<double>& p1) {
    std::vector<double> t;
    for (double p : p1) {
      t.push_back(1.0 - p);
      t.push_back(p);
    }
    return t;
  };
  for (const auto& [name, p] : direct) {
    vars.push_back({name, VariableKind::Observed, 2});
    edges.emplace_back("Z", name);
    cpts.push_back({name, binary_rows(p)});
    g.spec.groups.push_back({name, {name}, 2});
  }
  for (const auto& pr : pairs) {
    vars.push_back({pr.label, VariableKind::Latent, 2});
    edges.emplace_back("Z", pr.label);
    cpts.push_back({pr.label, binary_rows(pr.mid)});
    for (const auto& leaf : {pr.a, pr.b}) {
      vars.push_back({leaf, VariableKind::Observed, 2});
      edges.emplace_back(pr.label, leaf);
      cpts.push_back({leaf, {0.9, 0.1, 0.2, 0.8}});
    }
    g.spec.groups.push_back({pr.label, {pr.a, pr.b}, 2});
  }
  g.spec.target_label = "target";
  g.spec.z_cardinalities = {2, 3, 4};
  g.model = ltm::make_model(vars, edges, "Z", cpts);
  return g;
}

}  // namespace gen
