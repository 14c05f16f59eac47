#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "ricci/runner.hpp"

using namespace ricci;

TEST_CASE("catalog") {
  for (const char* name : {"cone", "edge", "glued-cones", "cone-family", "cone-3d", "sphere-flow", "static-cone-flow"})
    CHECK_NOTHROW(find_scenario(name));
  CHECK(list_scenarios("").size() == scenario_catalog().size());
  CHECK(list_scenarios("flow").size() >= 3);
  for (const ScenarioSpec& s : scenario_catalog()) {
    CHECK_FALSE(s.oracle.empty());
    for (const std::string& c : s.checks) CHECK_FALSE(c.empty());
  }
  CHECK_THROWS_AS(find_scenario("nope"), UnknownScenarioError);
}

TEST_CASE("config merging and validation") {
  const ScenarioSpec& cone = find_scenario("cone");
  const RunConfig d = make_config(cone);
  CHECK(d.params().at("alpha") == 0.5);
  CHECK(d.scheme().rel_tol == 1e-6);

  const RunConfig o = make_config(cone, Json::object(),
                                  {{"alpha", "0.25"}, {"quadrature.rel_tol", "1e-5"}, {"t", "0.1,0.3"}});
  CHECK(o.params().at("alpha") == 0.25);
  CHECK(o.scheme().rel_tol == 1e-5);
  CHECK(o.times() == std::vector<double>{0.1, 0.3});

  const RunConfig f = make_config(cone, Json{{"quadrature", {{"order", 7}}}});
  CHECK(f.scheme().order == 7);
  CHECK(make_config(find_scenario("cone-3d")).scheme().rel_tol == 1e-4);

  auto key_of = [&](const Json& file, std::vector<std::pair<std::string, std::string>> ov) {
    try {
      make_config(cone, file, ov);
    } catch (const ConfigError& e) {
      return e.key;
    }
    return std::string();
  };
  CHECK(key_of(Json{{"quadrature", {{"ordr", 3}}}}, {}) == "quadrature.ordr");
  CHECK(key_of(Json{{"quadrature", {{"order", "high"}}}}, {}) == "quadrature.order");
  CHECK(key_of({}, {{"beta", "1"}}) == "beta");
  CHECK(key_of({}, {{"quadrature.shell_ratio", "2"}}) == "quadrature.shell_ratio");
  CHECK(key_of({}, {{"flow.mode", "fast"}}) == "flow.mode");
  CHECK(key_of({}, {{"t", "-0.1"}}) == "flow.times");
}

TEST_CASE("field specs") {
  const ScenarioSpec& flat = find_scenario("flat-2d");
  const RunConfig c = make_config(flat, Json{{"fields", {{"v", {{"center", {0.2, 0.1}}, {"coef", {0.0, 1.0}}}}}}});
  const Scenario s = build_scenario("flat-2d", c);
  CHECK(s.v.value(Point{0.2, 0.1})[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(build_scenario("flat-2d", make_config(flat, Json{{"fields", {{"v", {{"coef", {1.0}}}}}}})),
                  ConfigError);
  CHECK_THROWS_AS(build_scenario("flat-2d", make_config(flat, {}, {{"fields.w.kind", "spiral"}})), ConfigError);
}

TEST_CASE("flat run passes and is reproducible") {
  const RunConfig cfg = make_config(find_scenario("flat-2d"));
  const RunReport a = run_scenario("flat-2d", cfg);
  CHECK(a.pass());
  CHECK(exit_code(a) == 0);
  CHECK(std::is_sorted(a.checks.begin(), a.checks.end(),
                       [](const CheckRecord& x, const CheckRecord& y) { return x.name < y.name; }));
  const RunReport b = run_scenario("flat-2d", cfg);
  CHECK(a.to_json(false).dump() == b.to_json(false).dump());
  CHECK(a.to_json().contains("timing"));
  CHECK_FALSE(a.to_json(false).contains("timing"));
  CHECK(a.to_json()["seed"] == 1);
}

TEST_CASE("reports and traces on disk") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ricci_runner_test";
  fs::remove_all(dir);
  const RunReport r = run_scenario("edge", make_config(find_scenario("edge")));
  write_outputs(dir.string(), r.to_json(), traces_of(r));
  CHECK(fs::exists(dir / "report.json"));
  std::ifstream in(dir / "trace_edge-line-density.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "index,value,error");
  const Json doc = Json::parse(std::ifstream(dir / "report.json"));
  CHECK(doc["checks"].size() == 2);
  for (const Json& c : doc["checks"]) CHECK(c["pass"] == true);
  fs::remove_all(dir);
}

TEST_CASE("verbs") {
  const RunConfig cone = make_config(find_scenario("cone"));
  const VerbOutput q = run_verb("qform-split", "cone", cone);
  CHECK(q.doc["value"].get<double>() == doctest::Approx(std::numbers::pi).epsilon(1e-3));
  CHECK(q.doc["split"]["q1"].is_number());
  CHECK(q.doc["verdicts"]["gamma_l2"] == "diverges");
  CHECK(q.doc["verdicts"]["tame"] == true);

  const VerbOutput a = run_verb("qform-alexandrov", "cone", cone);
  CHECK(a.doc["atoms"].get<double>() == doctest::Approx(std::numbers::pi).epsilon(1e-6));

  const VerbOutput g = run_verb("sobolev-gate", "cone", cone);
  CHECK(g.status == 2);
  CHECK(g.doc["finite"] == false);

  const RunConfig scf = make_config(find_scenario("static-cone-flow"));
  const VerbOutput f = run_verb("flow-check", "static-cone-flow", scf);
  CHECK(f.status == 0);
  CHECK(f.doc["verdict"] == "PASS");
  CHECK(f.doc["residuals"].size() == 3);
  const VerbOutput t = run_verb("flow-check", "cone", make_config(find_scenario("cone"), {}, {{"t", "0.1"}}));
  CHECK(t.status == 2);
  CHECK(t.doc["verdict"] == "FAIL");

  const VerbOutput k = run_verb("killing-defect", "sphere",
                                make_config(find_scenario("sphere"), {}, {{"fields.v.kind", "rotation"}}));
  CHECK(k.doc["defect"].get<double>() < 1e-6);

  CHECK_THROWS_AS(run_verb("qform-kahler", "sphere", make_config(find_scenario("sphere"))), UnsupportedGeometryError);
  CHECK_THROWS_AS(run_verb("qform-alexandrov", "glued-cones", make_config(find_scenario("glued-cones"))),
                  UnsupportedGeometryError);
}

TEST_CASE("measure verb") {
  const VerbOutput m = run_verb("ricci-measure", "cone", make_config(find_scenario("cone")));
  REQUIRE(m.doc["atoms"].size() == 1);
  CHECK(m.doc["atoms"][0]["mass_matrix"][0][0].get<double>() == doctest::Approx(std::numbers::pi).epsilon(1e-2));
  CHECK(m.doc["checks"]["pass"] == true);
  CHECK_FALSE(m.traces.empty());
}
