#pragma once

#include <string>

#include "reachcert/sim.hpp"

namespace reachcert {

// Renders the scene (box, obstacles, targets) and one or more trajectories
// to a standalone SVG file.
void render_svg(const Scenario& sc, const std::vector<Trajectory>& trajectories,
                const std::string& path);

}  // namespace reachcert
