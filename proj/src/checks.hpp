#pragma once

#include <functional>
#include <string>

#include "ricci/runner.hpp"

namespace ricci::detail {

using CheckFn = std::function<CheckRecord(const Scenario&)>;

/// Throws Error for an unknown check name.
const CheckFn& check_function(const std::string& name);
bool has_check(const std::string& name);

}  // namespace ricci::detail
