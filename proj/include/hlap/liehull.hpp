#pragma once

#include "hlap/distribution.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hlap {

constexpr int kMaxHullDepth = 6;
constexpr int kHullGridPerAxis = 9;

struct HullReport {
    int depth = 0;
    // new_fields_per_depth[0] holds the generators; entry s-1 the fields
    // adjoined at bracket depth s.
    std::vector<std::vector<VectorField>> new_fields_per_depth;
    // Candidates kept without a symbolic verdict (sampled member or inconclusive).
    std::vector<std::vector<VectorField>> uncertified_per_depth;
    std::vector<Point> grid;
    // rank_by_depth[s-1][g] = rank at grid[g] of all fields through depth s.
    std::vector<std::vector<int>> rank_by_depth;
    std::vector<int> pole_order_per_depth; // max pole order over the new fields of each depth
    bool bracket_generating = false;
    bool membership_closed = false;
    bool suspicious_growth = false;

    const std::vector<int>& rank_profile() const { return rank_by_depth.back(); }
    std::vector<VectorField> all_fields() const;
};

// Breadth-first closure: depth 1 is the generator list, depth s brackets the
// generators with the fields adjoined at depth s-1. A candidate is dropped
// only when it is a certified member of the span so far. Throws
// Error(InvalidArgument) for max_depth outside 1..kMaxHullDepth.
HullReport hull_generate(const Distribution& d, int max_depth);

// Distribution generated by every field of the report, generators first.
Distribution hull_distribution(const HullReport& r, const Distribution& d);

struct StructureCoefficients {
    Chart chart;
    int rank = 0;
    // table[i][j][k] = c^k_ij with [X_i, X_j] = sum_k c^k_ij X_k.
    std::vector<std::vector<ExprVec>> table;
    MembershipMode mode = MembershipMode::Symbolic;
    std::string gauge;      // how non-unique solutions were fixed
    double residual = 0.0;  // max defect at fresh sample points

    const Expr& c(int k, int i, int j) const { return table[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(k)]; }
};

// Throws Error(NotInvolutive) naming the first bracket lacking a symbolic
// membership certificate.
StructureCoefficients structure_coefficients(const Distribution& f);
StructureCoefficients commuting_coefficients(const Chart& c, int rank);

struct InvolutivityResult {
    bool involutive = true;
    std::optional<std::pair<int, int>> pair; // generator indices of the witness
    VectorField witness;                     // their bracket
    bool witness_certified = false;          // certified non-member rather than merely uncertified
};

// Involutive iff every pairwise bracket is a certified member. Propagates
// Error(Inconclusive) from membership.
InvolutivityResult is_involutive(const Distribution& d);

} // namespace hlap
