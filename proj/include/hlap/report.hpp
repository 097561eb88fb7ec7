#pragma once

#include "hlap/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hlap {

using Json = nlohmann::json;

struct Report {
    // {"provenance": {...}, "analyses": {name: {"status": ...}}}. Contains no
    // timestamps, so equal configs give byte-identical bodies.
    Json body;
    std::vector<Eigen::SparseMatrix<double>> stiffness; // from `discretize`, for triplet export
    bool failed = false; // some analysis reported an error or was skipped

    std::string json_text() const; // body.dump(2) plus newline
    std::string summary() const;   // one line per analysis
    std::string csv() const;       // spectrum and probe rows
};

// Runs the configured analyses in dependency order. Module errors become
// {"status": "error", "kind", "message"} objects; analyses whose inputs
// failed become {"status": "skipped", "reason"}. Independent analyses still run.
Report run_job(const Job& job);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Golden file layout:
//   coordinates: chart names for parsing expressions
//   tolerances:  {pointer: absolute tolerance} for numeric values (default 0)
//   values:      {pointer: JSON value}
//   expressions: {pointer: expression string}, compared canonically
//   operators:   {pointer: {key: coefficient}}, missing keys are zero
//   matrices:    {pointer: [[expression, ...], ...]}
// Pointers are JSON pointers into the report body. Returns one line per
// mismatching pointer; empty when the report matches.
std::vector<std::string> golden_compare(const Json& report, const Json& golden);

} // namespace hlap
