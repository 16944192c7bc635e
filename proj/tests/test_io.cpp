#include <doctest.h>

#include <json.hpp>

#include "ltm/error.hpp"
#include "ltm/inference.hpp"
#include "ltm/io.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace ltm;

namespace {

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("dataset CSV parsing") {
  const auto d = parse_dataset_csv("a, b ,c\n0,1,\n1,,0\n");
  CHECK(d.names() == std::vector<std::string>{"a", "b", "c"});
  CHECK(d.num_records() == 2);
  CHECK(d.value(0, 2) == kMissing);
  CHECK(d.value(1, 1) == kMissing);
  CHECK(d.total_weight() == 2.0);

  const auto w = parse_dataset_csv("a,_weight\n1,2.5\n0,1\n");
  CHECK(w.num_variables() == 1);
  CHECK(w.total_weight() == 3.5);

  const auto dd = parse_dataset_csv("a,b\n0,1\n1,1\n0,1\n", true);
  CHECK(dd.num_records() == 2);
  CHECK(dd.weight(0) == 2.0);
}

TEST_CASE("dataset CSV errors name the line") {
  CHECK(error_of([] { parse_dataset_csv("a,b\n0,1\n0\n", false, "x.csv"); }).find("x.csv line 3") != std::string::npos);
  CHECK(error_of([] { parse_dataset_csv("a,b\n0,q\n"); }).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset_csv("a,a\n0,1\n"), Error);
  CHECK_THROWS_AS(parse_dataset_csv("a,b\n"), Error);
  CHECK_THROWS_AS(parse_dataset_csv("a\n-1\n"), Error);
  CHECK_THROWS_AS(parse_dataset_csv("a,_weight\n1,0\n"), Error);
}

TEST_CASE("dataset CSV round trip") {
  const auto d = parse_dataset_csv("a,b\n0,1\n1,\n");
  CHECK(format_dataset_csv(d) == "a,b\n0,1\n1,\n");
  const auto w = parse_dataset_csv("a,_weight\n1,2.5\n");
  CHECK(format_dataset_csv(parse_dataset_csv(format_dataset_csv(w))) == format_dataset_csv(w));
}

TEST_CASE("model JSON round trip is exact") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto m = oracle::random_model(rng, 6, 3, 4, 3);
    const auto text = model_to_json(m);
    const auto back = model_from_json(text);
    CHECK(back.cpts() == m.cpts());
    CHECK(back.name(back.root()) == m.name(m.root()));
    CHECK(model_to_json(back) == text);
  }
  const auto doc = nlohmann::json::parse(model_to_json(oracle::figure_model()));
  CHECK(doc["format_version"] == kModelFormatVersion);
  CHECK(doc["root"] == "AS");
  CHECK(doc["cpts"][0]["parent"].is_null());
}

TEST_CASE("model JSON errors") {
  auto doc = nlohmann::json::parse(model_to_json(oracle::figure_model()));
  SUBCASE("version") {
    doc["format_version"] = 99;
    CHECK(error_of([&] { model_from_json(doc.dump()); }).find("version") != std::string::npos);
  }
  SUBCASE("field path") {
    doc["variables"][2]["cardinality"] = "two";
    CHECK(error_of([&] { model_from_json(doc.dump()); }).find("$.variables[2].cardinality") != std::string::npos);
  }
  SUBCASE("cycle names its nodes") {
    doc["edges"][4] = {"MG", "LS"};
    const auto msg = error_of([&] { model_from_json(doc.dump()); });
    CHECK_FALSE(msg.empty());
    CHECK(msg.find("LS") != std::string::npos);
  }
  SUBCASE("bad column kept when not strict") {
    doc["cpts"][2]["table"][0] = 1.0;
    CHECK_THROWS_AS(model_from_json(doc.dump()), Error);
    const auto m = model_from_json(doc.dump(), false);
    CHECK(validate(m).size() == 1);
  }
  SUBCASE("not JSON") { CHECK_THROWS_AS(model_from_json("{"), Error); }
}

TEST_CASE("group spec JSON") {
  const auto spec = spec_from_json(R"({"target_label":"PD","groups":[
      {"label":"a","symptoms":["a"]},
      {"label":"Sleep","symptoms":["x","y"],"cardinality":"auto"}],
      "z_cardinality_range":[2,3]})");
  CHECK(spec.target_label == "PD");
  REQUIRE(spec.groups.size() == 2);
  CHECK(spec.groups[0].cardinality == 2);
  CHECK(spec.groups[1].cardinality == 0);
  CHECK(spec.z_cardinalities == std::vector<int>{2, 3});
  CHECK(spec_from_json(spec_to_json(spec)).groups[1].symptoms == spec.groups[1].symptoms);
  CHECK(error_of([] { spec_from_json(R"({"groups":[{"label":"a"}],"z_cardinality_range":[2]})"); })
            .find("$.groups[0]") != std::string::npos);
  CHECK_THROWS_AS(spec_from_json(R"({"groups":[],"z_cardinality_range":[]})"), Error);
}

TEST_CASE("content digest is stable") {
  CHECK(content_digest("") == "cbf29ce484222325");
  CHECK(content_digest("a") == "af63dc4c8601ec8c");
}
