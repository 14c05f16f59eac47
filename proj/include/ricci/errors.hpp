#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "ricci/tensor.hpp"

namespace ricci {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string format_point(const Point& p);

/// Metric with smallest/largest eigenvalue ratio below the degeneracy cutoff.
class DegenerateMetricError : public Error {
public:
  explicit DegenerateMetricError(Point where, const std::string& what = "degenerate metric")
      : Error(what + " at " + format_point(where)), point(std::move(where)) {}
  Point point;
};

/// Evaluation inside a stratum's exclusion radius without an analytic closure.
class SingularEvaluationError : public Error {
public:
  explicit SingularEvaluationError(Point where)
      : Error("evaluation inside singular exclusion radius at " + format_point(where)),
        point(std::move(where)) {}
  Point point;
};

class ChartDegeneracyError : public Error {
public:
  explicit ChartDegeneracyError(Point where)
      : Error("non-invertible transition Jacobian at " + format_point(where)),
        point(std::move(where)) {}
  Point point;
};

class ChartMismatchError : public Error {
public:
  using Error::Error;
};

/// Integrand returned NaN or infinity.
class IntegrandFailureError : public Error {
public:
  explicit IntegrandFailureError(Point where)
      : Error("integrand failure (non-finite value) at " + format_point(where)),
        point(std::move(where)) {}
  Point point;
};

class OracleIneligibleError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  ConfigError(std::string key_path, const std::string& what)
      : Error("config error at '" + key_path + "': " + what), key(std::move(key_path)) {}
  std::string key;
};

class UnknownScenarioError : public Error {
public:
  explicit UnknownScenarioError(const std::string& name) : Error("unknown scenario: " + name) {}
};

class UnsupportedGeometryError : public Error {
public:
  using Error::Error;
};

}  // namespace ricci
