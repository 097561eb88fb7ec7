#pragma once

#include "hlap/config.hpp"

#include <string>
#include <vector>

namespace hlap {

// Built-in example labels in a fixed order.
std::vector<std::string> registry_list();

// YAML source of a built-in example. Throws Error(UnknownLabel).
const std::string& registry_source(const std::string& label);
JobConfig registry_get(const std::string& label);

} // namespace hlap
