#pragma once

#include "hlap/chart.hpp"

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hlap {

using Rational = mpq_class;

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<const Node>;
} // namespace detail

// Atom kinds inside a monomial.
//   Coord: x_var^e with integer e (negative e is a pole on x_var = 0).
//   Flat:  flatplus(x_var)^r = 1_{x_var>0} exp(-r/x_var), rational r.
//   Exp:   exp(arg), exponent always 1.
//   Base:  arg^e for a normalized multi-term polynomial arg, e < 0 only.
enum class AtomKind : std::uint8_t { Coord = 0, Flat = 1, Exp = 2, Base = 3 };

struct Factor {
    AtomKind kind = AtomKind::Coord;
    int var = -1;
    detail::NodePtr arg;
    Rational exp;
};

struct Term {
    Rational coeff;
    std::vector<Factor> factors; // sorted by (kind, var, arg)
};

// Immutable symbolic scalar in canonical form.
//
// Canonical form: either a piecewise node `piecewise(x_var > cut; then; else)`
// whose branches are canonical and distinct, or a sum of terms sorted in
// graded order, with like monomials collected and every term carrying the
// same Base denominator part. Numerators are fully expanded.
class Expr {
public:
    Expr();
    Expr(long v);
    Expr(int v) : Expr(static_cast<long>(v)) {}
    Expr(const Rational& q);
    explicit Expr(detail::NodePtr n) : n_(std::move(n)) {}

    static Expr coord(int i);
    static Expr flatplus(int i);

    bool is_zero() const;
    std::optional<Rational> constant_value() const;
    bool is_piecewise() const;
    int pw_var() const;
    const Rational& pw_cut() const;
    Expr pw_then() const;
    Expr pw_else() const;
    const std::vector<Term>& terms() const;

    Expr pow(long n) const;
    Expr pow_rational(const Rational& q) const; // monomials only
    Expr recip() const;

    const detail::NodePtr& node() const { return n_; }

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    Expr& operator+=(const Expr& b) { return *this = *this + b; }
    Expr& operator-=(const Expr& b) { return *this = *this - b; }
    Expr& operator*=(const Expr& b) { return *this = *this * b; }

private:
    detail::NodePtr n_;
};

// Structural total order on canonical forms; 0 iff identical.
int compare(const Expr& a, const Expr& b);
bool identical(const Expr& a, const Expr& b);

Expr exp(const Expr& a);
Expr piecewise(int var, const Rational& cut, const Expr& then_branch, const Expr& else_branch);

Expr differentiate(const Expr& e, int i);

// Replaces coordinate j by images[j]. flatplus(x_j) requires images[j] = c*x_k
// with c > 0; piecewise conditions require images affine in one coordinate.
Expr substitute(const Expr& e, const std::vector<Expr>& images);

// Simplifies using the knowledge that the point lies in `box`:
// flatplus(x_i) -> 0 when hi_i <= 0, -> exp(-1/x_i) when lo_i >= 0,
// piecewise branches selected when the box lies on one side of the cut.
Expr restrict_to(const Expr& e, const Box& box);

// Evaluation. Throws Error(SingularPoint) on a pole that is not killed by a
// vanishing flatplus factor.
double evaluate(const Expr& e, const Point& p);

// Fast repeated evaluation of one expression.
class CompiledExpr {
public:
    CompiledExpr();
    explicit CompiledExpr(const Expr& e);
    ~CompiledExpr();
    CompiledExpr(const CompiledExpr&);
    CompiledExpr& operator=(const CompiledExpr&);
    CompiledExpr(CompiledExpr&&) noexcept;
    CompiledExpr& operator=(CompiledExpr&&) noexcept;

    double operator()(const Point& p) const;
    double operator()(const double* p) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

using MultiIndex = std::vector<int>;

// All multi-indices of dimension n with |alpha| <= order, graded then lexicographic.
std::vector<MultiIndex> multi_indices(int n, int order);

struct JetEntry {
    MultiIndex alpha;
    double value; // d^alpha e(p) / alpha!
};

std::vector<JetEntry> taylor_jet(const Expr& e, const Point& p, int order);

enum class EqualityCriterion { Canonical, Sampled, Mismatch };

struct EqualResult {
    bool equal = false;
    EqualityCriterion criterion = EqualityCriterion::Mismatch;
    double max_deviation = 0.0;
    explicit operator bool() const { return equal; }
};

EqualResult equal(const Expr& a, const Expr& b, const Box& region, std::uint64_t seed = 0x5eedULL);
EqualResult equal(const Expr& a, const Expr& b, const Chart& chart, std::uint64_t seed = 0x5eedULL);

// Zero test used for pivots: canonical zero, or numerically zero at sampled points.
bool is_zero_robust(const Expr& e, const Box& region);

struct SmoothVerdict {
    bool smooth = true;
    std::string reason;
};

// Smoothness on the open box: poles are allowed off the box or when
// absorbed by a flatplus factor with positive rate; denominators must not
// vanish on sampled points; piecewise must not straddle its cut.
SmoothVerdict is_smooth_on(const Expr& e, const Box& box);

// Largest negative exponent magnitude over coordinate and Base factors.
int max_pole_order(const Expr& e);

bool is_polynomial(const Expr& e); // coordinates with nonnegative powers only
int total_degree(const Expr& e);   // for polynomials; -1 for zero

// Breakpoints per axis: flatplus and poles at 0, piecewise cuts.
std::vector<std::vector<double>> breakpoints(const Expr& e, int dim);

// Text grammar.
std::string to_string(const Expr& e, const Chart& chart);
std::string to_string(const Rational& q);
Expr parse_expr(std::string_view text, const Chart& chart);
Rational parse_rational(std::string_view text);

} // namespace hlap
