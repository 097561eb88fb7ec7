#include "doctest.h"

#include "hlap/error.hpp"
#include "hlap/expr.hpp"
#include "hlap/expr_matrix.hpp"

#include <cmath>
#include <random>

using namespace hlap;

namespace {

const Chart kXY({"x", "y"});
const Chart kXYZ({"x", "y", "z"});

Expr P(const char* s, const Chart& c = kXY)
{
    return parse_expr(s, c);
}

} // namespace

TEST_CASE("arithmetic reaches canonical forms")
{
    Expr x = Expr::coord(0), y = Expr::coord(1);
    CHECK(identical((x + y) * (x - y), x * x - y * y));
    CHECK((x - x).is_zero());
    CHECK(identical(x * x.recip(), Expr(1)));
    CHECK(identical((x + y) / (x + y), Expr(1)));
    CHECK(identical((x * x - y * y) / (x - y), x + y));
    CHECK(identical(P("1/(x+1) - 1/(x+1)"), Expr()));
    CHECK(identical(P("1/(x+1) + x/(x+1)"), Expr(1)));
    CHECK(identical(P("x^-1 * x^2"), x));
    CHECK(identical(P("exp(x)*exp(-x)"), Expr(1)));
    CHECK(identical(P("0.25"), Expr(Rational(1, 4))));
}

TEST_CASE("rational partition of unity cancels exactly")
{
    Expr t = Expr::coord(0);
    Expr d = (Expr(1) + t * t).recip();
    Expr p1 = (Expr(1) - t * t) * d;
    Expr p2 = Expr(2) * t * d;
    CHECK(identical(p1 * p1 + p2 * p2, Expr(1)));
}

TEST_CASE("flatplus calculus")
{
    Expr f = Expr::flatplus(0);
    // d/dx exp(-1/x) = x^-2 exp(-1/x)
    CHECK(identical(differentiate(f, 0), f * Expr::coord(0).pow(-2)));
    CHECK(std::fabs(evaluate(f, {1.0, 0.0}) - std::exp(-1.0)) < 1e-15);
    CHECK(evaluate(f, {-1.0, 0.0}) == 0.0);
    CHECK(evaluate(f, {0.0, 0.0}) == 0.0);
    // A pole killed by a vanishing flat factor evaluates to zero.
    CHECK(evaluate(f * Expr::coord(0).pow(-3), {0.0, 1.0}) == 0.0);
    CHECK_THROWS_AS(evaluate(Expr::coord(0).pow(-1), {0.0, 1.0}), Error);
    // flatplus(x) * exp(a/x) = flatplus(x)^(1-a)
    Expr g = f * exp(Expr(Rational(1, 3)) * Expr::coord(0).pow(-1));
    CHECK(identical(g, f.pow_rational(Rational(2, 3))));
    CHECK(is_smooth_on(g, unbounded_box(2)).smooth);
    Expr h = f * exp(Expr(Rational(3, 2)) * Expr::coord(0).pow(-1));
    CHECK_FALSE(is_smooth_on(h, unbounded_box(2)).smooth);
}

TEST_CASE("flatplus restriction")
{
    Expr f = Expr::flatplus(0);
    Box neg{{-2, -1}, {-1, 1}};
    Box pos{{1, 2}, {-1, 1}};
    CHECK(restrict_to(f, neg).is_zero());
    CHECK(identical(restrict_to(f, pos), exp(-Expr::coord(0).recip())));
}

TEST_CASE("taylor jets")
{
    Chart c({"x"});
    auto j = taylor_jet(exp(Expr::coord(0)), {0.0}, 3);
    REQUIRE(j.size() == 4);
    CHECK(j[0].value == doctest::Approx(1.0));
    CHECK(j[1].value == doctest::Approx(1.0));
    CHECK(j[2].value == doctest::Approx(0.5));
    CHECK(j[3].value == doctest::Approx(1.0 / 6.0));
    // Every jet of flatplus vanishes at the origin.
    for (const auto& e : taylor_jet(Expr::flatplus(0), {0.0}, 6))
        CHECK(e.value == 0.0);
    auto m = multi_indices(2, 2);
    REQUIRE(m.size() == 6);
    CHECK(m[1] == MultiIndex{1, 0});
    CHECK(m[2] == MultiIndex{0, 1});
}

TEST_CASE("printer and parser round trip")
{
    const char* cases[] = {
        "x^2*y - 3/2*x",
        "x^-2*flatplus(x)",
        "flatplus(x)^(1/2)",
        "flatplus(x)^0",
        "exp(x*y)",
        "recip(x^2 + y^2 + 1)",
        "piecewise(x > 1; 0; piecewise(x > -1; 1 - x^2; 0))",
        "x*recip(x + y)^2 + 1",
    };
    for (const char* s : cases) {
        Expr e = P(s);
        std::string printed = to_string(e, kXY);
        Expr back = P(printed.c_str());
        CHECK_MESSAGE(identical(e, back), s << " -> " << printed);
    }
    CHECK(to_string(P("x^-1"), kXY) == "x^-1");
    CHECK(to_string(Expr::flatplus(0), kXY) == "flatplus(x)");
}

TEST_CASE("random round trip property")
{
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, 6);
    std::uniform_int_distribution<int> small(-3, 3);
    for (int trial = 0; trial < 100; ++trial) {
        Expr e;
        for (int k = 0; k < 3; ++k) {
            Expr t(small(rng));
            switch (pick(rng)) {
            case 0: t = t * Expr::coord(0).pow(small(rng)); break;
            case 1: t = t * Expr::coord(1).pow(std::abs(small(rng))); break;
            case 2: t = t * Expr::flatplus(0); break;
            case 3: t = t * exp(Expr::coord(1)); break;
            case 4: t = t * (Expr::coord(0) + Expr::coord(1) + Expr(2)).recip(); break;
            default: break;
            }
            e += t;
        }
        Expr back = P(to_string(e, kXY).c_str());
        REQUIRE_MESSAGE(identical(e, back), to_string(e, kXY));
    }
}

TEST_CASE("parse errors carry a kind")
{
    try {
        P("x +* y");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
    CHECK_THROWS_AS(P("unknown(x)"), Error);
    CHECK_THROWS_AS(P("w + 1"), Error);
    CHECK_THROWS_AS(P("(x + 1)^(1/2)"), Error);
}

TEST_CASE("substitution")
{
    Expr x = Expr::coord(0), y = Expr::coord(1);
    Expr e = P("x^2*y + flatplus(x)");
    Expr s = substitute(e, {Expr(2) * y, x});
    CHECK(identical(s, P("4*y^2*x + flatplus(y)^(1/2)")));
    Expr pw = P("piecewise(x > 1; x; 0)");
    Expr ps = substitute(pw, {-x, y});
    CHECK(evaluate(ps, {-2.0, 0.0}) == doctest::Approx(2.0));
    CHECK(evaluate(ps, {2.0, 0.0}) == 0.0);
}

TEST_CASE("equality criteria")
{
    Box b = unbounded_box(2);
    CHECK(equal(P("x+y"), P("y+x"), b).criterion == EqualityCriterion::Canonical);
    auto r = equal(Expr::flatplus(0) * Expr::flatplus(0), Expr::flatplus(0).pow_rational(2), b);
    CHECK(r.equal);
    CHECK_FALSE(equal(P("x"), P("y"), b).equal);
    CHECK(is_zero_robust(Expr(), b));
    CHECK_FALSE(is_zero_robust(P("x"), b));
}

TEST_CASE("smoothness verdicts")
{
    Box whole = unbounded_box(2);
    Box right{{1, 2}, {-1, 1}};
    CHECK_FALSE(is_smooth_on(P("x^-1"), whole).smooth);
    CHECK(is_smooth_on(P("x^-1"), right).smooth);
    CHECK(is_smooth_on(P("x^-4*flatplus(x)"), whole).smooth);
    CHECK_FALSE(is_smooth_on(P("flatplus(x)^0"), whole).smooth);
    CHECK_FALSE(is_smooth_on(P("recip(x^2+y^2)"), whole).smooth);
    CHECK(is_smooth_on(P("recip(x^2+y^2+1)"), whole).smooth);
    CHECK(max_pole_order(P("x^-2 + y^-4")) == 4);
}

TEST_CASE("symbolic linear algebra")
{
    Box b = unbounded_box(2);
    Expr x = Expr::coord(0);
    // [1 0; 0 x] c = (0, 1) has the unique non-smooth solution (0, 1/x).
    ExprMat a{{Expr(1), Expr()}, {Expr(), x}};
    auto s = solve_linear(a, {Expr(), Expr(1)}, b);
    CHECK(s.consistent);
    CHECK(s.rank == 2);
    CHECK(identical(s.particular[1], x.recip()));
    // Rank-deficient system with a nullspace.
    ExprMat r{{Expr(1), x}, {Expr(2), Expr(2) * x}};
    auto t = solve_linear(r, {Expr(1), Expr(2)}, b);
    CHECK(t.consistent);
    CHECK(t.rank == 1);
    REQUIRE(t.nullspace.size() == 1);
    CHECK(identical(t.nullspace[0][0], -x));
    CHECK_FALSE(solve_linear(r, {Expr(1), Expr(3)}, b).consistent);

    ExprMat g{{Expr(4), Expr(2) * x}, {Expr(2) * x, x * x + Expr(1)}};
    ExprMat gi = inverse(g, b);
    ExprMat id = matmul(g, gi);
    CHECK(identical(id[0][0], Expr(1)));
    CHECK(identical(id[0][1], Expr()));
    CHECK(identical(determinant(g, b), Expr(4)));
    ExprMat l = cholesky(g, b);
    CHECK(identical(l[0][0], Expr(2)));
    CHECK(identical(l[1][0], x));
    CHECK(identical(l[1][1], Expr(1)));
    CHECK_THROWS_AS(cholesky(ExprMat{{Expr(2)}}, b), Error);
}

TEST_CASE("polynomial ansatz")
{
    Expr x = Expr::coord(0), y = Expr::coord(1);
    // x*c0 + y*c1 = x^2 + y^2 has the polynomial solution (x, y).
    ExprMat a{{x, y}};
    auto s = polynomial_solve(a, {x * x + y * y}, 2, 3);
    REQUIRE(s);
    CHECK(identical((*s)[0] * x + (*s)[1] * y, x * x + y * y));
    // x*c = 1 has no polynomial solution.
    CHECK_FALSE(polynomial_solve(ExprMat{{x}}, {Expr(1)}, 2, 3));
}
