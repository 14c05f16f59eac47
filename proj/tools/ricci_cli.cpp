// ricci <verb> <scenario> [--key value ...] [--out dir]

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ricci/runner.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides parse_overrides(const std::vector<std::string>& rest) {
  Overrides out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& tok = rest[i];
    if (tok.rfind("--", 0) != 0) throw ricci::ConfigError(tok, "expected --key value");
    const std::string body = tok.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= rest.size()) throw ricci::ConfigError(body, "missing value");
      out.emplace_back(body, rest[++i]);
    }
  }
  return out;
}

ricci::Json read_config(const std::string& path) {
  if (path.empty()) return ricci::Json::object();
  std::ifstream in(path);
  if (!in) throw ricci::ConfigError("--config", "cannot open " + path);
  try {
    return ricci::Json::parse(in, nullptr, true, true);
  } catch (const ricci::Json::exception& e) {
    throw ricci::ConfigError("--config", e.what());
  }
}

void print_catalog(const std::vector<ricci::ScenarioSpec>& specs) {
  std::printf("%-20s %-24s %s\n", "scenario", "oracle", "summary");
  for (const ricci::ScenarioSpec& s : specs)
    std::printf("%-20s %-24s %s\n", s.name.c_str(), s.oracle.c_str(), s.summary.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ricci measure and weak flow checks"};
  std::string verb, scenario, out_dir, config_path;
  bool quiet = false;
  app.add_option("verb", verb, "run, list, qform, qform-split, qform-be, qform-kahler, qform-alexandrov, "
                               "killing-defect, ricci-measure, flow-check, flow-residual, sobolev-gate")
      ->required();
  app.add_option("scenario", scenario, "scenario name (filter for list)");
  app.add_option("--out", out_dir, "directory for report.json and trace CSVs");
  app.add_option("--config", config_path, "JSON config file");
  app.add_flag("-q,--quiet", quiet, "do not print the report");
  app.allow_extras();
  CLI11_PARSE(app, argc, argv);

  try {
    if (verb == "list") {
      const auto specs = ricci::list_scenarios(scenario);
      print_catalog(specs);
      if (!out_dir.empty()) {
        ricci::Json cat = ricci::Json::array();
        for (const ricci::ScenarioSpec& s : specs)
          cat.push_back({{"name", s.name}, {"oracle", s.oracle}, {"summary", s.summary}, {"params", s.params},
                         {"checks", s.checks}});
        ricci::write_outputs(out_dir, cat, {}, "catalog.json");
      }
      return 0;
    }
    const auto& known = ricci::verbs();
    if (std::find(known.begin(), known.end(), verb) == known.end()) {
      std::cerr << "error: unknown verb '" << verb << "'\n";
      return 1;
    }
    if (scenario.empty()) {
      std::cerr << "error: missing scenario\n";
      return 1;
    }
    const ricci::ScenarioSpec& spec = ricci::find_scenario(scenario);
    const ricci::RunConfig cfg =
        ricci::make_config(spec, read_config(config_path), parse_overrides(app.remaining()));
    if (verb == "run") {
      const ricci::RunReport rep = ricci::run_scenario(scenario, cfg);
      const ricci::Json doc = rep.to_json();
      if (!out_dir.empty()) ricci::write_outputs(out_dir, doc, ricci::traces_of(rep));
      if (!quiet) {
        for (const ricci::CheckRecord& c : rep.checks)
          std::printf("%-4s %-26s computed=%-14.8g oracle=%-14.8g tol=%-10.3g %s%s\n", c.pass ? "PASS" : "FAIL",
                      c.name.c_str(), c.computed, c.oracle, c.tolerance, c.source.c_str(),
                      c.error.empty() ? "" : (" error: " + c.error).c_str());
      }
      return ricci::exit_code(rep);
    }
    const ricci::VerbOutput out = ricci::run_verb(verb, scenario, cfg);
    if (!out_dir.empty()) ricci::write_outputs(out_dir, out.doc, out.traces);
    if (!quiet) std::cout << out.doc.dump(2) << "\n";
    return out.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
