#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ricci/errors.hpp"
#include "ricci/runner.hpp"

namespace py = pybind11;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

ricci::RunConfig config_for(const std::string& scenario, const std::string& file, const Overrides& overrides) {
  const ricci::Json doc = file.empty() ? ricci::Json::object() : ricci::Json::parse(file);
  return ricci::make_config(ricci::find_scenario(scenario), doc, overrides);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ricci measure and weak flow checks";
  m.attr("__version__") = ricci::kToolVersion;

  static py::exception<ricci::Error> base(m, "RicciError", PyExc_RuntimeError);
  static py::exception<ricci::ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<ricci::UnknownScenarioError> unknown(m, "UnknownScenarioError", base.ptr());
  static py::exception<ricci::UnsupportedGeometryError> unsupported(m, "UnsupportedGeometryError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ricci::ConfigError& e) {
      py::set_error(config, py::make_tuple(e.key, e.what()));
    } catch (const ricci::UnknownScenarioError& e) {
      py::set_error(unknown, e.what());
    } catch (const ricci::UnsupportedGeometryError& e) {
      py::set_error(unsupported, e.what());
    } catch (const ricci::Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("verbs", &ricci::verbs);

  m.def("catalog_json", [](const std::string& filter) {
    ricci::Json cat = ricci::Json::array();
    for (const ricci::ScenarioSpec& s : ricci::list_scenarios(filter))
      cat.push_back({{"name", s.name}, {"summary", s.summary}, {"oracle", s.oracle}, {"params", s.params},
                     {"checks", s.checks}, {"time_dependent", s.time_dependent}});
    return cat.dump();
  }, py::arg("filter") = "");

  m.def("config_json", [](const std::string& scenario, const std::string& file, const Overrides& overrides) {
    return config_for(scenario, file, overrides).doc.dump();
  }, py::arg("scenario"), py::arg("config") = "", py::arg("overrides") = Overrides{});

  m.def("run_json", [](const std::string& scenario, const std::string& file, const Overrides& overrides,
                       bool timing, const std::string& out) {
    const ricci::RunConfig cfg = config_for(scenario, file, overrides);
    ricci::RunReport rep;
    {
      py::gil_scoped_release release;
      rep = ricci::run_scenario(scenario, cfg);
    }
    if (!out.empty()) ricci::write_outputs(out, rep.to_json(), ricci::traces_of(rep));
    return py::make_tuple(rep.to_json(timing).dump(), ricci::exit_code(rep));
  }, py::arg("scenario"), py::arg("config") = "", py::arg("overrides") = Overrides{}, py::arg("timing") = true,
     py::arg("out") = "");

  m.def("verb_json", [](const std::string& verb, const std::string& scenario, const std::string& file,
                        const Overrides& overrides, const std::string& out) {
    const ricci::RunConfig cfg = config_for(scenario, file, overrides);
    ricci::VerbOutput res;
    {
      py::gil_scoped_release release;
      res = ricci::run_verb(verb, scenario, cfg);
    }
    if (!out.empty()) ricci::write_outputs(out, res.doc, res.traces);
    return py::make_tuple(res.doc.dump(), res.status);
  }, py::arg("verb"), py::arg("scenario"), py::arg("config") = "", py::arg("overrides") = Overrides{},
     py::arg("out") = "");
}
