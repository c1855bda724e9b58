// SPDX-License-Identifier: Apache-2.0
// Built-in scenario runners behind riskit::cli. Internal header.
#pragma once

#include <cstdint>
#include <string>

#include "riskit/cli.hpp"

namespace riskit::cli::detail {

Json defaults_for(const std::string& name);
// Range checks beyond the type checks done by resolve(); throws ConfigError.
void validate_params(const std::string& name, const Json& p);
ScenarioOutput run(const std::string& name, const Json& p, std::uint64_t seed, int trials);

} // namespace riskit::cli::detail
