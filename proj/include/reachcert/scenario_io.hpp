#pragma once

#include <string>

#include "reachcert/sim.hpp"

namespace reachcert {

struct ScenarioError : std::runtime_error {
    explicit ScenarioError(const std::string& msg)
        : std::runtime_error("scenario: " + msg) {}
};

// Parses and fully validates a scenario JSON file: polynomial syntax,
// dimension consistency, lambda/epsilon/degree ranges, and x0 membership in
// the explicit safe set.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text);

}  // namespace reachcert
