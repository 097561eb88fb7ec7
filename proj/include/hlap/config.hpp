#pragma once

#include "hlap/liehull.hpp"
#include "hlap/numerics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hlap {

struct DistributionSpec {
    std::string label;
    std::vector<std::vector<std::string>> generators; // coefficient strings per field
};

struct PresentationSpec {
    std::string mode = "minimal"; // "minimal" at base_point, or "generators"
    Point base_point;             // empty: origin
};

struct GridSpec {
    std::vector<int> n;
    std::vector<Boundary> boundary;
};

struct IsometrySpec {
    std::vector<std::string> forward;
    std::vector<std::string> inverse;
    std::string target; // distribution label; empty: the primary distribution
};

// One job: a chart, distributions over it (the first is primary), one density
// and the analyses to run. Expression strings use the symexpr grammar.
struct JobConfig {
    std::string label;
    std::vector<std::string> coordinates;
    Box region;                                   // chart region; empty: unbounded
    std::vector<DistributionSpec> distributions;
    std::string density = "1";
    PresentationSpec presentation;
    std::vector<int> partition_axes;              // rational partition axes; empty: all
    Box box;                                      // bounded analysis box
    std::vector<Point> points;                    // fiber and rank sample points
    std::vector<std::string> analyses;
    int hull_depth = 3;
    std::optional<IsometrySpec> isometry;
    std::optional<GridSpec> grid;
    int spectrum_count = 4;
    std::vector<double> probe_times{0.01, 0.1};
    Point probe_source;                           // empty: box centre
    std::string consistency_function;
    std::map<std::string, double> tolerances;     // defaults merged in
    std::uint64_t seed = 1;
    int jet_order = kDefaultJetOrder;
};

// Analyses in execution order.
const std::vector<std::string>& known_analyses();
const std::map<std::string, double>& default_tolerances();

// Throws Error(ConfigParse) on malformed YAML, missing keys, unresolved labels
// or unparsable expressions, and Error(UnknownAnalysis) on an unknown name.
JobConfig parse_config(const std::string& yaml_text);
JobConfig load_config(const std::string& path);

// Canonical YAML rendering; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const JobConfig& c);

// "key=value" with a known tolerance key. Throws Error(ConfigParse) otherwise.
void apply_tolerance_override(JobConfig& c, const std::string& kv);

// Parsed objects of a validated config.
struct Job {
    JobConfig config;
    Chart chart;
    std::vector<Distribution> distributions;
    Density density;

    const Distribution& primary() const { return distributions.front(); }
    const Distribution& distribution(const std::string& label) const;
};

// Throws Error(ConfigParse) when an expression fails to parse or the density
// is not positive on the region.
Job resolve(const JobConfig& c);

} // namespace hlap
