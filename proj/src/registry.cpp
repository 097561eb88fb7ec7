#include "hlap/registry.hpp"

#include "hlap/error.hpp"

#include <map>

namespace hlap {

namespace {

// Registry examples live as config text so they exercise the same parser as
// user configs. Boxes are Dirichlet because the coefficients are not periodic.
const std::map<std::string, std::string>& sources()
{
    static const std::map<std::string, std::string> s{
        {"gl2_vanishing_origin", R"cfg(label: gl2_vanishing_origin
chart:
  coordinates: [x, y]
distributions:
  - label: gl2
    generators: [["x", "0"], ["0", "x"], ["y", "0"], ["0", "y"]]
density: "1"
presentation: {mode: minimal, base_point: [0, 0]}
box: [[-1, 1], [-1, 1]]
points: [[0, 0], [1, 0], [0.5, -0.25]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, derham, isometry, discretize, spectrum, probe, consistency]
hull: {max_depth: 3}
isometry:
  forward: ["3/5*x - 4/5*y", "4/5*x + 3/5*y"]
  inverse: ["3/5*x + 4/5*y", "-4/5*x + 3/5*y"]
grid: {n: [31, 31], boundary: [dirichlet, dirichlet]}
spectrum: {count: 4}
probe: {times: [0.01, 0.1], source: [0, 0]}
consistency: {function: "exp(x/2)*(1 + y^2) + x^3*y"}
seed: 1
)cfg"},
        {"pathological_flat", R"cfg(label: pathological_flat
chart:
  coordinates: [x, y]
distributions:
  - label: pathological
    generators: [["1", "0"], ["0", "flatplus(x)"]]
density: "1"
presentation: {mode: generators}
box: [[-1, 1], [-1, 1]]
points: [[-1, 0], [1, 0], [0, 0.5]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, discretize, spectrum, probe, consistency]
hull: {max_depth: 3}
grid: {n: [31, 31], boundary: [dirichlet, dirichlet]}
spectrum: {count: 4}
probe: {times: [0.01, 0.1], source: [0.5, 0]}
consistency: {function: "exp(x/2)*(1 + y^2) + x^3*y"}
seed: 1
)cfg"},
        {"heisenberg", R"cfg(label: heisenberg
chart:
  coordinates: [x, y, z]
distributions:
  - label: heisenberg
    generators: [["1", "0", "-1/2*y"], ["0", "1", "1/2*x"]]
density: "1"
presentation: {mode: minimal, base_point: [0, 0, 0]}
box: [[-1, 1], [-1, 1], [-1, 1]]
points: [[0, 0, 0], [1, 2, 3]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, isometry, discretize, spectrum, probe]
hull: {max_depth: 3}
isometry:
  forward: ["x + 1", "y - 2", "z + 1/3 + 1/2*(y + 2*x)"]
  inverse: ["x - 1", "y + 2", "z - 1/3 - 1/2*(y + 2*x)"]
grid: {n: [10, 10, 10], boundary: [dirichlet, dirichlet, dirichlet]}
spectrum: {count: 4}
probe: {times: [0.01, 0.1], source: [0, 0, 0]}
seed: 1
)cfg"},
        {"grushin", R"cfg(label: grushin
chart:
  coordinates: [x, y]
distributions:
  - label: grushin
    generators: [["1", "0"], ["0", "x"]]
density: "1"
presentation: {mode: minimal, base_point: [0, 0]}
box: [[-1, 1], [-1, 1]]
points: [[0, 0], [1, 0], [0, 1]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, discretize, spectrum, probe, consistency]
hull: {max_depth: 3}
grid: {n: [31, 31], boundary: [dirichlet, dirichlet]}
spectrum: {count: 4}
probe: {times: [0.01, 0.1], source: [0, 0]}
consistency: {function: "exp(x/2)*(1 + y^2) + x^3*y"}
seed: 1
)cfg"},
        {"martinet", R"cfg(label: martinet
chart:
  coordinates: [x, y, z]
distributions:
  - label: martinet
    generators: [["1", "0", "0"], ["0", "1", "1/2*x^2"]]
density: "1"
presentation: {mode: minimal, base_point: [0, 0, 0]}
box: [[-1, 1], [-1, 1], [-1, 1]]
points: [[0, 0, 0], [1, 0, 0]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, discretize, spectrum]
hull: {max_depth: 3}
grid: {n: [10, 10, 10], boundary: [dirichlet, dirichlet, dirichlet]}
spectrum: {count: 4}
seed: 1
)cfg"},
        {"exs_distr_i", R"cfg(label: exs_distr_i
chart:
  coordinates: [x, y, z, w]
distributions:
  - label: exs_distr_i
    generators: [["1", "0", "0", "0"], ["0", "1", "x", "1/2*x^2"], ["0", "0", "0", "y"]]
density: "1"
presentation: {mode: generators}
partition: {axes: [0, 1]}
box: [[-1, 1], [-1, 1], [-1, 1], [-1, 1]]
points: [[0, 0, 0, 0], [0, 1, 0, 0]]
analyses: [fibers, presentation, metric, laplacian, symbol, ims, hull, discretize, spectrum]
hull: {max_depth: 2}
grid: {n: [6, 6, 6, 6], boundary: [dirichlet, dirichlet, dirichlet, dirichlet]}
spectrum: {count: 4}
seed: 1
)cfg"},
        {"bump_line", R"cfg(label: bump_line
chart:
  coordinates: [x]
distributions:
  - label: bump_line
    generators: [["piecewise(x > 1; 0; piecewise(x > -1; (1 - x^2)^4; 0))"]]
density: "1"
presentation: {mode: generators}
box: [[-2, 2]]
points: [[0], [0.5], [1.5]]
analyses: [fibers, presentation, metric, laplacian, symbol, discretize, spectrum]
grid: {n: [63], boundary: [dirichlet]}
spectrum: {count: 4}
seed: 1
)cfg"},
    };
    return s;
}

} // namespace

std::vector<std::string> registry_list()
{
    return {"gl2_vanishing_origin", "pathological_flat", "heisenberg", "grushin", "martinet", "exs_distr_i", "bump_line"};
}

const std::string& registry_source(const std::string& label)
{
    auto it = sources().find(label);
    if (it == sources().end())
        throw Error(ErrorKind::UnknownLabel, "'" + label + "'");
    return it->second;
}

JobConfig registry_get(const std::string& label)
{
    return parse_config(registry_source(label));
}

} // namespace hlap
