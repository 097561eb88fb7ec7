#pragma once

#include "hlap/liehull.hpp"

#include <string>
#include <vector>

namespace hlap {

using IndexSet = std::vector<int>; // strictly increasing

// k-subsets of {0..r-1} in lexicographic order.
std::vector<IndexSet> k_subsets(int r, int k);

// A section of Lambda^k E*_U given on increasing index sets of the frame.
struct FoliatedKForm {
    int degree = 0;
    LocalPresentation presentation;
    ExprVec entries; // aligned with k_subsets(rank, degree)

    // Antisymmetric extension: any index order, zero on repeated indices.
    Expr at(const std::vector<int>& idx) const;
};

FoliatedKForm zero_form(const LocalPresentation& p, int k);
FoliatedKForm function_form(const LocalPresentation& p, const Expr& u);

// An ordinary k-form on the chart, sum_J entries_J dx_J over increasing J.
struct CoordinateForm {
    Chart chart;
    int degree = 0;
    ExprVec entries; // aligned with k_subsets(n, degree)
};

CoordinateForm exterior_derivative(const CoordinateForm& w);
// eta(i_1..i_k) = w(X_i1, ..., X_ik), the realization of the pulled-back form.
FoliatedKForm realize_form(const CoordinateForm& w, const LocalPresentation& p);

// Chevalley-Eilenberg formula evaluated entry by entry. Throws
// Error(DegreeOverflow) when k + 1 exceeds the rank.
FoliatedKForm ce_differential(const FoliatedKForm& eta, const StructureCoefficients& sc);

// Matrix of scalar operators between Lambda^k and Lambda^l realizations.
struct FormOperator {
    Chart chart;
    int from_degree = 0;
    int to_degree = 0;
    int rank = 0;
    std::vector<std::vector<DiffOperator>> entries; // [row subset][column subset]

    bool is_zero() const;
};

// The same differential assembled as an operator matrix.
FormOperator ce_operator(const LocalPresentation& p, const StructureCoefficients& sc, int k);
FoliatedKForm apply(const FormOperator& d, const FoliatedKForm& eta);
FormOperator compose(const FormOperator& a, const FormOperator& b);
FormOperator operator+(const FormOperator& a, const FormOperator& b);

// Gram matrix of Lambda^k E* for the dual frame metric: minors of G^-1.
ExprMat exterior_gram(const LocalPresentation& p, int k);

struct ComplexReport {
    int k_max = 0;
    std::vector<FormOperator> d;               // d_0 .. d_{k_max+1}
    std::vector<bool> d_squared_zero;          // d_{k+1} d_k canonically zero, k = 0..k_max
    std::vector<int> corpus_failures;          // per k: pulled-back corpus forms with d d eta != 0
    std::vector<int> naturality_failures;      // per k: corpus forms with d realize(w) != realize(dw)
    std::vector<int> realization_constrained;  // degrees above the maximal pointwise rank
    std::string gauge;

    bool all_zero() const;
};

// Checks d_{k+1} o d_k = 0 for k = 0..k_max, on the operator matrices and on a
// corpus of realizations pulled back from coordinate forms. Throws
// Error(DegreeOverflow) when k_max + 2 exceeds the rank.
ComplexReport d_squared_check(const LocalPresentation& p, const StructureCoefficients& sc, int k_max);

struct HodgeLaplacian {
    int degree = 0;
    Density density;
    FormOperator d_down;     // d_{k-1}, empty when k = 0
    FormOperator d_up;       // d_k, empty when k = rank
    FormOperator star_down;  // d*_{k-1}: Lambda^k -> Lambda^(k-1)
    FormOperator star_up;    // d*_k: Lambda^(k+1) -> Lambda^k
    FormOperator op;         // d d* + d* d on Lambda^k
};

// d*_k = H_k^-1 D_k^dagger H_(k+1) with D^dagger the entrywise formal adjoint
// against mu and H the exterior Gram matrices.
FormOperator ce_adjoint(const LocalPresentation& p, const StructureCoefficients& sc, int k, const Density& mu);
HodgeLaplacian hodge_laplacian(int k, const LocalPresentation& p, const StructureCoefficients& sc, const Density& mu);

// int <a, b>_{H_k} dmu over a bounded box by tensor Gauss-Legendre.
double form_inner_product(const FoliatedKForm& a, const FoliatedKForm& b, const Density& mu, const Box& box,
                          int points = 24);

} // namespace hlap
