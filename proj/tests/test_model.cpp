#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "ltm/model.hpp"
#include "support/oracle.hpp"

using namespace ltm;

TEST_CASE("figure model is valid and has the hand-counted dimension") {
  const auto m = oracle::figure_model();
  CHECK(validate(m).empty());
  CHECK(dimension(m) == 11);
}

TEST_CASE("dimension of latent class models") {
  std::vector<Variable> obs;
  for (int i = 0; i < 4; ++i) obs.push_back({"X" + std::to_string(i), VariableKind::Observed, 2});
  CHECK(dimension(make_lcm_skeleton("Y", 2, obs)) == 9);
  CHECK(dimension(make_lcm_skeleton("Y", 1, obs)) == 4);
}

TEST_CASE("validate names each violation") {
  const auto good = oracle::figure_model();

  SUBCASE("latent leaf") {
    auto vars = good.variables();
    vars.push_back({"EXTRA", VariableKind::Latent, 2});
    auto edges = good.edges();
    edges.push_back({1, 6});
    auto cpts = good.cpts();
    cpts.push_back({0.5, 0.5, 0.5, 0.5});
    const LatentTreeModel m(vars, edges, good.root(), cpts);
    const auto v = validate(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("EXTRA") != std::string::npos);
  }

  SUBCASE("cycle") {
    auto edges = good.edges();
    edges.back() = {2, 3};  // MG - SG closes a loop through AS; HG is cut off
    const LatentTreeModel m(good.variables(), edges, good.root(), good.cpts());
    const auto v = validate(m);
    CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s.find("cycle") != std::string::npos; }));
  }

  SUBCASE("column that does not sum to one") {
    auto cpts = good.cpts();
    cpts[2] = {0.8, 0.3, 0.2, 0.8};
    const LatentTreeModel m(good.variables(), good.edges(), good.root(), cpts);
    const auto v = validate(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("MG") != std::string::npos);
  }

  SUBCASE("observed root") {
    const LatentTreeModel m(good.variables(), good.edges(), 2, good.cpts());
    CHECK_FALSE(validate(m).empty());
  }

  SUBCASE("require_valid throws a data error") {
    auto cpts = good.cpts();
    cpts[0] = {0.7, 0.7};
    const LatentTreeModel m(good.variables(), good.edges(), good.root(), cpts);
    try {
      require_valid(m);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Data);
    }
  }
}

TEST_CASE("marginals of the figure model") {
  const auto m = oracle::figure_model();
  const std::vector<std::string> mg{"MG"};
  CHECK(marginal(m, mg).values[0] == doctest::Approx(0.62).epsilon(1e-12));
  const std::vector<std::string> as{"AS"};
  const auto root = marginal(m, as);
  CHECK(root.values[0] == doctest::Approx(0.7));
  CHECK(root.values[1] == doctest::Approx(0.3));
}

TEST_CASE("single-symptom marginal from a partition table") {
  const auto t = oracle::partition_tables()[0];
  const std::vector<std::string> thick{"Thick tongue fur"};
  CHECK(marginal(t.model(), thick).values[1] == doctest::Approx(0.1718).epsilon(1e-12));
}

TEST_CASE("marginal agrees with full enumeration") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_model(rng, 6, 3);
    const auto joint = oracle::full_joint(m);
    const std::vector<NodeId> nodes{m.observed()[0], m.latents().back(), m.observed()[3]};
    std::vector<std::string> names;
    for (NodeId v : nodes) names.push_back(m.name(v));
    const auto got = marginal(m, names).values;
    const auto want = oracle::brute_marginal(joint, nodes);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("marginal rejects unknown and oversized subsets") {
  const auto m = oracle::figure_model();
  const std::vector<std::string> bad{"NOPE"};
  CHECK_THROWS_AS(marginal(m, bad), Error);
  const std::vector<std::string> dup{"MG", "MG"};
  CHECK_THROWS_AS(marginal(m, dup), Error);
}

TEST_CASE("reroot keeps the distribution") {
  const auto m = oracle::figure_model();
  const auto r = reroot(m, "LS");
  CHECK(m.name(r.root()) == "LS");
  CHECK(validate(r).empty());
  const std::vector<std::string> as{"AS"};
  CHECK(marginal(r, as).values[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(dimension(r) == dimension(m));

  const auto same = reroot(m, "AS");
  CHECK(same.cpts() == m.cpts());

  CHECK_THROWS_AS(reroot(m, "MG"), Error);
  CHECK_THROWS_AS(reroot(m, "nope"), Error);

  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rm = oracle::random_model(rng, 7, 3);
    for (NodeId h : rm.latents()) {
      const auto rr = reroot(rm, rm.name(h));
      CHECK(validate(rr).empty());
      for (int k = 0; k < 10; ++k) {
        const auto ev = oracle::to_evidence(rm, oracle::random_evidence(rng, rm));
        CHECK(std::fabs(record_loglik(rm, ev) - record_loglik(rr, ev)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("forward sampling") {
  const auto m = oracle::figure_model();
  SUBCASE("empty") {
    const auto d = forward_sample(m, 0, 1);
    CHECK(d.empty());
    CHECK(d.names() == std::vector<std::string>{"MG", "SG", "EG", "HG"});
  }
  SUBCASE("deterministic") {
    const auto a = forward_sample(m, 200, 9);
    const auto b = forward_sample(m, 200, 9);
    for (std::size_t r = 0; r < a.num_records(); ++r)
      CHECK(std::equal(a.row(r).begin(), a.row(r).end(), b.row(r).begin()));
  }
  SUBCASE("frequency matches the marginal") {
    const auto d = forward_sample(m, 100000, 5);
    const auto col = *d.column("MG");
    double low = 0;
    for (std::size_t r = 0; r < d.num_records(); ++r) low += d.value(r, col) == 0;
    const double f = low / 100000.0;
    CHECK(f >= 0.61);
    CHECK(f <= 0.63);
  }
  SUBCASE("latent columns on request") {
    const auto d = forward_sample(m, 5, 1, true);
    CHECK(d.column("AS").has_value());
  }
}

TEST_CASE("dataset basics") {
  const DataSet d({"a", "b"}, {0, 1, 0, 1, 1, kMissing}, {2.0, 1.0, 0.5});
  CHECK(d.num_records() == 3);
  CHECK(d.total_weight() == doctest::Approx(3.5));
  CHECK(d.cardinalities() == std::vector<int>{2, 2});
  const auto dd = d.dedupe();
  CHECK(dd.num_records() == 2);
  CHECK(dd.weight(0) == doctest::Approx(3.0));
  const std::vector<std::string> cols{"b"};
  CHECK(d.project(cols).num_variables() == 1);
  CHECK_THROWS_AS(DataSet({"a", "a"}, {0, 0}, {1.0}), Error);
  CHECK_THROWS_AS(DataSet({"a"}, {0}, {0.0}), Error);
}

TEST_CASE("find_cycle returns a closed walk") {
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 0}, {2, 3}};
  const auto cycle = find_cycle(4, edges);
  REQUIRE(cycle.size() >= 4);
  CHECK(cycle.front() == cycle.back());
  const std::vector<Edge> tree{{0, 1}, {1, 2}};
  CHECK(find_cycle(3, tree).empty());
}
