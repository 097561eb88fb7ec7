#pragma once

#include "hlap/expr.hpp"

#include <optional>
#include <vector>

namespace hlap {

using ExprVec = std::vector<Expr>;
using ExprMat = std::vector<ExprVec>; // row-major

ExprMat zero_matrix(int rows, int cols);
ExprMat identity_matrix(int n);
ExprMat transpose(const ExprMat& a);
ExprMat matmul(const ExprMat& a, const ExprMat& b);
ExprVec matvec(const ExprMat& a, const ExprVec& v);

struct LinearSolve {
    bool consistent = false;
    int rank = 0;
    std::vector<int> pivot_columns;
    ExprVec particular;            // free unknowns set to zero
    std::vector<ExprVec> nullspace; // one vector per free column
};

// Gauss-Jordan elimination of A x = b over symbolic scalars. Zero tests use
// is_zero_robust on `region`; pivots are taken column by column, choosing the
// structurally simplest admissible entry.
LinearSolve solve_linear(const ExprMat& a, const ExprVec& b, const Box& region);

// Throws Error(RankDeficient) when A is not invertible on `region`.
ExprMat inverse(const ExprMat& a, const Box& region);
Expr determinant(const ExprMat& a, const Box& region);

// Lower-triangular L with L L^T = G, when every square root needed is exact.
// Throws Error(NonSymbolicCholesky) otherwise.
ExprMat cholesky(const ExprMat& g, const Box& region);

// Exact square root of a monomial with positive perfect-square coefficient.
std::optional<Expr> exact_sqrt(const Expr& e);

// Polynomial solution of A c = b with A, b polynomial: tries total degrees
// 0..max_degree and returns the first exact particular solution.
std::optional<ExprVec> polynomial_solve(const ExprMat& a, const ExprVec& b, int dim, int max_degree);

} // namespace hlap
