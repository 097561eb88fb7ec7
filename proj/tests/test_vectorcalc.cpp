#include "doctest.h"

#include "hlap/error.hpp"
#include "hlap/quadrature.hpp"
#include "hlap/vectorcalc.hpp"

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

VectorField F(std::initializer_list<const char*> cs, const Chart& c = kXY)
{
    ExprVec v;
    for (const char* s : cs)
        v.push_back(parse_expr(s, c));
    return VectorField(c, v);
}

// Random polynomial vector fields of degree <= 2.
VectorField random_field(std::mt19937& rng, const Chart& c)
{
    std::uniform_int_distribution<int> coef(-2, 2);
    std::uniform_int_distribution<int> deg(0, 2);
    VectorField x = VectorField::zero(c);
    for (auto& e : x.coeffs)
        for (int t = 0; t < 2; ++t) {
            Expr m(coef(rng));
            for (int i = 0; i < c.dim(); ++i)
                m = m * Expr::coord(i).pow(deg(rng) % 2);
            e += m;
        }
    return x;
}

} // namespace

TEST_CASE("apply")
{
    CHECK(identical(apply(F({"1", "0"}), P("x^2")), P("2*x")));
    CHECK(identical(apply(F({"0", "x"}), P("x*y")), P("x^2")));
    CHECK(identical(apply(F({"1", "0", "-1/2*y"}, kXYZ), P("z", kXYZ)), P("-1/2*y", kXYZ)));
}

TEST_CASE("lie brackets")
{
    auto hx = F({"1", "0", "-1/2*y"}, kXYZ);
    auto hy = F({"0", "1", "1/2*x"}, kXYZ);
    CHECK(identical(lie_bracket(hx, hy), F({"0", "0", "1"}, kXYZ)));
    CHECK(identical(lie_bracket(F({"1", "0"}), F({"0", "x"})), F({"0", "1"})));
    // [d_x, f d_y] = x^-2 f d_y for the flat function f.
    auto y = F({"0", "flatplus(x)"});
    CHECK(identical(lie_bracket(F({"1", "0"}), y), P("x^-2") * y));
}

TEST_CASE("Jacobi identity on a generated corpus")
{
    std::mt19937 rng(11);
    std::vector<VectorField> corpus;
    for (int i = 0; i < 50; ++i)
        corpus.push_back(random_field(rng, kXY));
    for (int i = 0; i + 2 < 50; i += 3) {
        const auto &a = corpus[i], &b = corpus[i + 1], &c = corpus[i + 2];
        auto j = lie_bracket(a, lie_bracket(b, c)) + lie_bracket(b, lie_bracket(c, a)) + lie_bracket(c, lie_bracket(a, b));
        CHECK(j.is_zero());
        CHECK(identical(lie_bracket(a, b), Expr(-1) * lie_bracket(b, a)));
    }
}

TEST_CASE("divergence and formal adjoints")
{
    Chart line({"x"});
    auto leb = Density::lebesgue(kXY);
    CHECK(divergence(F({"1", "0"}), leb).is_zero());
    CHECK(identical(divergence(F({"x", "0"}), leb), Expr(1)));
    Density ex(line, P("exp(x)", line));
    CHECK(identical(divergence(VectorField(line, {Expr::coord(0)}), ex), P("1 + x", line)));

    auto adj = formal_adjoint(F({"x", "0"}), leb);
    DiffOperator expect = -DiffOperator::from_field(F({"x", "0"})) - DiffOperator::multiplication(kXY, Expr(1));
    CHECK(identical(adj, expect));
    CHECK(identical(formal_adjoint(F({"0", "x"}), leb), -DiffOperator::from_field(F({"0", "x"}))));
    CHECK_THROWS_AS(Density(line, P("x", line)), Error);
}

TEST_CASE("adjoint involution")
{
    const char* tests[] = {"x", "y^2", "x*y + 1", "exp(x)", "x^3 - y", "flatplus(x)", "x^2*y^2", "y", "2", "x + y"};
    std::mt19937 rng(3);
    // Canonical for rational and single-exponential weights.
    for (const char* w : {"1 + x^2 + y^2", "exp(x)"}) {
        Density mu(kXY, P(w));
        for (int f = 0; f < 3; ++f) {
            auto x = random_field(rng, kXY);
            auto xss = formal_adjoint(formal_adjoint(x, mu), mu);
            for (const char* t : tests)
                CHECK(identical(apply(xss, P(t)), apply(x, P(t))));
        }
    }
    // Sums of exponentials in a denominator fall back to sampled equality.
    Density mu(kXY, P("exp(x) + y^2 + 1"));
    auto x = random_field(rng, kXY);
    auto xss = formal_adjoint(formal_adjoint(x, mu), mu);
    for (const char* t : tests)
        CHECK(equal(apply(xss, P(t)), apply(x, P(t)), unbounded_box(2)).equal);
}

TEST_CASE("Leibniz rule")
{
    auto x = F({"x*y", "exp(y)"});
    Expr u = P("x^2 + flatplus(x)"), v = P("y*recip(1 + x^2)");
    CHECK(identical(apply(x, u * v), apply(x, u) * v + u * apply(x, v)));
}

TEST_CASE("composition and commutators")
{
    Chart line({"x"});
    auto dx = DiffOperator::derivative(line, {1});
    auto mx = DiffOperator::multiplication(line, Expr::coord(0));
    CHECK(identical(commutator(dx, mx), DiffOperator::multiplication(line, Expr(1))));
    CHECK(identical(compose(-dx, dx), DiffOperator::derivative(line, {2}, Expr(-1))));
    // [[-d^2, phi], phi] = -2 (phi')^2
    Expr phi = P("(1 - x^2)*recip(1 + x^2)", line);
    auto lap = DiffOperator::derivative(line, {2}, Expr(-1));
    auto mphi = DiffOperator::multiplication(line, phi);
    auto cc = commutator(commutator(lap, mphi), mphi);
    Expr dphi = differentiate(phi, 0);
    CHECK(identical(cc, DiffOperator::multiplication(line, Expr(-2) * dphi * dphi)));
    CHECK(cc.order() == 0);
    auto d3 = DiffOperator::derivative(line, {3});
    CHECK_THROWS_AS(compose(d3, DiffOperator::derivative(line, {2})), Error);
}

TEST_CASE("operator keys")
{
    CHECK(operator_key({1, 1}, kXY) == "dxdy");
    CHECK(operator_key({0, 0}, kXY) == "1");
    CHECK(parse_operator_key("dxdxdy", kXY) == MultiIndex{2, 1});
}

TEST_CASE("gauss legendre integrates polynomials exactly")
{
    auto r = gauss_legendre(64);
    double s = 0.0;
    for (double w : r.weights)
        s += w;
    CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
    Box b{{0, 1}, {-1, 2}};
    CHECK(integrate(P("x^2*y"), b) == doctest::Approx(1.0 / 3.0 * 1.5).epsilon(1e-13));
    CHECK(integrate(P("exp(x)"), Box{{0, 1}, {0, 1}}) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
}

TEST_CASE("quadrature adjointness of example fields")
{
    Box box{{-1, 1}, {-1, 1}};
    Expr b = bump(box);
    struct Case {
        VectorField x;
        Density mu;
    };
    std::vector<Case> cases{
        {F({"1", "0"}), Density::lebesgue(kXY)},
        {F({"0", "x"}), Density::lebesgue(kXY)},
        {F({"x", "0"}), Density::lebesgue(kXY)},
        {F({"x", "y"}), Density(kXY, P("exp(x)"))},
        {F({"0", "flatplus(x)"}), Density(kXY, P("1 + x^2"))},
    };
    Expr u = P("x + y^2 + 1") * b, v = P("x*y - 2*y + 3") * b;
    for (const auto& c : cases) {
        Expr lhs = apply(c.x, u) * v * c.mu.weight;
        Expr rhs = u * apply(formal_adjoint(c.x, c.mu), v) * c.mu.weight;
        CHECK(std::fabs(integrate(lhs, box) - integrate(rhs, box)) < 1e-8);
    }
}
