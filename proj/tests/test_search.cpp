#include <doctest.h>

#include <algorithm>
#include <set>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "ltm/search.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace ltm;

namespace {

LatentTreeModel lcm(int n, int card = 2) {
  std::vector<Variable> obs;
  for (int i = 0; i < n; ++i) obs.push_back({"X" + std::to_string(i + 1), VariableKind::Observed, 2});
  return make_lcm_skeleton("Y01", card, obs);
}

std::size_t count(const std::vector<SearchOperator>& ops, OperatorKind k) {
  return static_cast<std::size_t>(std::count_if(ops.begin(), ops.end(), [&](const auto& o) { return o.kind == k; }));
}

}  // namespace

TEST_CASE("expansion candidates of a latent class model") {
  const auto m = lcm(5);
  const auto ops = enumerate_candidates(m, Phase::Expansion, SearchConfig{});
  CHECK(count(ops, OperatorKind::StateIntroduction) == 1);
  CHECK(count(ops, OperatorKind::NodeIntroduction) == 10);  // pairs of five neighbors
  for (const auto& op : ops)
    if (op.kind == OperatorKind::NodeIntroduction) CHECK(op.created == "Y02");
  // Order is reproducible.
  CHECK(ops == enumerate_candidates(m, Phase::Expansion, SearchConfig{}));
}

TEST_CASE("limits prune candidates") {
  const auto m = lcm(4, 3);
  SearchConfig c;
  c.max_latent_cardinality = 3;
  c.max_latent_count = 1;
  CHECK(enumerate_candidates(m, Phase::Expansion, c).empty());
}

TEST_CASE("adjustment and simplification candidates") {
  const auto m = oracle::figure_model();
  const auto adj = enumerate_candidates(m, Phase::Adjustment, SearchConfig{});
  // AS and LS have degree 3; each can move one of its two leaves to the other.
  CHECK(adj.size() == 4);
  const auto simp = enumerate_candidates(m, Phase::Simplification, SearchConfig{});
  CHECK(count(simp, OperatorKind::StateDeletion) == 2);
  CHECK(count(simp, OperatorKind::NodeDeletion) == 2);
}

TEST_CASE("every operator yields a valid model") {
  Rng rng(5);
  const auto m = oracle::figure_model();
  for (Phase phase : {Phase::Expansion, Phase::Adjustment, Phase::Simplification})
    for (const auto& op : enumerate_candidates(m, phase, SearchConfig{})) {
      const auto cand = apply_operator(m, op, rng);
      INFO(op.describe());
      CHECK(validate(cand.model).empty());
      CHECK(cand.free_nodes.size() == cand.model.size());
    }
}

TEST_CASE("state introduction keeps the distribution close") {
  Rng rng(9);
  const auto m = oracle::figure_model();
  const auto cand = apply_operator(m, {OperatorKind::StateIntroduction, "LS", {}, {}, {}, {}}, rng);
  CHECK(cand.model.cardinality(cand.model.index("LS")) == 3);
  const std::vector<std::string> as{"AS"};
  CHECK(marginal(cand.model, as).values[0] == doctest::Approx(0.7));
}

TEST_CASE("node relocation moves the leaf") {
  Rng rng(1);
  const auto m = oracle::figure_model();
  const auto cand = apply_operator(m, {OperatorKind::NodeRelocation, "AS", "MG", {}, "LS", {}}, rng);
  CHECK(cand.model.adjacent(cand.model.index("LS"), cand.model.index("MG")));
  CHECK_FALSE(cand.model.adjacent(cand.model.index("AS"), cand.model.index("MG")));
  CHECK_THROWS_AS(apply_operator(m, {OperatorKind::NodeRelocation, "AS", "EG", {}, "LS", {}}, rng), Error);
}

TEST_CASE("node deletion merges into the destination") {
  Rng rng(1);
  const auto m = oracle::figure_model();
  const auto cand = apply_operator(m, {OperatorKind::NodeDeletion, "LS", {}, {}, "AS", {}}, rng);
  CHECK_FALSE(cand.model.find("LS"));
  CHECK(cand.model.degree(cand.model.index("AS")) == 4);
  CHECK(validate(cand.model).empty());
}

TEST_CASE("search finds two islands on a small sample") {
  const auto truth = gen::two_islands();
  const auto data = forward_sample(truth, 3000, 17);
  SearchConfig c;
  c.em.restarts = 4;
  c.em.seed = 3;
  c.seed = 3;
  const auto result = search(data, c);
  CHECK(result.fit.bic >= result.initial_bic);
  CHECK(validate(result.fit.model).empty());
  CHECK(result.fit.model.latents().size() == 2);
  for (std::size_t i = 1; i < result.steps.size(); ++i)
    CHECK(result.steps[i].bic_before == doctest::Approx(result.steps[i - 1].bic_after));
  const auto log = format_search_log(result);
  CHECK(log.rfind("initial\tLCM\t", 0) == 0);

  c.em.threads = 2;
  const auto again = search(data, c);
  CHECK(again.fit.model.cpts() == result.fit.model.cpts());
  CHECK(format_search_log(again) == log);
}

TEST_CASE("search warns about constant columns and rejects tiny inputs") {
  const DataSet d({"a", "b", "c"}, {0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0}, {1, 1, 1, 1});
  SearchConfig c;
  c.em.restarts = 2;
  const auto r = search(d, c);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("'a'") != std::string::npos);
  const DataSet one({"a"}, {0, 1}, {1, 1});
  CHECK_THROWS_AS(search(one, c), Error);
}
