#pragma once

#include "hlap/expr.hpp"
#include "hlap/expr_matrix.hpp"

#include <map>
#include <string>
#include <vector>

namespace hlap {

// X = sum_i coeffs[i] d_i
struct VectorField {
    Chart chart;
    ExprVec coeffs;

    VectorField() = default;
    VectorField(Chart c, ExprVec v);
    static VectorField zero(const Chart& c);
    static VectorField partial(const Chart& c, int i);
    int dim() const { return chart.dim(); }
    bool is_zero() const;
};

// mu = weight dx_1 ... dx_n with weight > 0 on the region.
struct Density {
    Chart chart;
    Expr weight;

    Density() = default;
    Density(Chart c, Expr w);
    static Density lebesgue(const Chart& c);
    bool is_lebesgue() const;
};

// alpha = sum_i coeffs[i] dx_i
struct OneForm {
    Chart chart;
    ExprVec coeffs;
};

// P = sum_alpha terms[alpha] d^alpha. Zero coefficients are never stored, so
// operator equality is coefficient-wise canonical equality.
struct DiffOperator {
    Chart chart;
    std::map<MultiIndex, Expr> terms;

    DiffOperator() = default;
    explicit DiffOperator(Chart c) : chart(std::move(c)) {}
    static DiffOperator multiplication(const Chart& c, const Expr& f);
    static DiffOperator from_field(const VectorField& x);
    static DiffOperator derivative(const Chart& c, const MultiIndex& alpha, const Expr& coeff = Expr(1));

    int order() const; // -1 for the zero operator
    bool is_zero() const { return terms.empty(); }
    Expr coefficient(const MultiIndex& alpha) const;
    void add_term(const MultiIndex& alpha, const Expr& c);
};

constexpr int kMaxOperatorOrder = 4;

Expr apply(const VectorField& x, const Expr& u);
Expr apply(const DiffOperator& p, const Expr& u);

VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(const Expr& f, const VectorField& a);
bool identical(const VectorField& a, const VectorField& b);

DiffOperator operator+(const DiffOperator& a, const DiffOperator& b);
DiffOperator operator-(const DiffOperator& a, const DiffOperator& b);
DiffOperator operator-(const DiffOperator& a);
DiffOperator operator*(const Expr& f, const DiffOperator& a);
bool identical(const DiffOperator& a, const DiffOperator& b);

VectorField lie_bracket(const VectorField& x, const VectorField& y);
Expr divergence(const VectorField& x, const Density& mu);

// X* = -X - div_mu(X)
DiffOperator formal_adjoint(const VectorField& x, const Density& mu);
// P^dagger u = sum_alpha (-1)^|alpha| (1/m) d^alpha (m c_alpha u)
DiffOperator formal_adjoint(const DiffOperator& p, const Density& mu);

// Leibniz expansion of P o Q. Throws Error(OrderOverflow) above kMaxOperatorOrder.
DiffOperator compose(const DiffOperator& p, const DiffOperator& q);
DiffOperator commutator(const DiffOperator& p, const DiffOperator& q);

DiffOperator restrict_to(const DiffOperator& p, const Box& box);

// Multi-index key "dxdy" built from coordinate names; "1" for the zero index.
std::string operator_key(const MultiIndex& alpha, const Chart& chart);
MultiIndex parse_operator_key(const std::string& key, const Chart& chart);

std::string to_string(const VectorField& x);
std::string to_string(const DiffOperator& p);

} // namespace hlap
