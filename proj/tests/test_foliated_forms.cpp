#include "doctest.h"

#include "fixtures.hpp"
#include "hlap/error.hpp"
#include "hlap/foliated_forms.hpp"
#include "hlap/laplacian.hpp"

#include <cmath>

using namespace hlap;
using fx::E;

namespace {

bool all_zero(const FoliatedKForm& f)
{
    for (const auto& e : f.entries)
        if (!e.is_zero())
            return false;
    return true;
}

bool same(const FoliatedKForm& a, const FoliatedKForm& b)
{
    if (a.degree != b.degree || a.entries.size() != b.entries.size())
        return false;
    for (size_t i = 0; i < a.entries.size(); ++i)
        if (!identical(a.entries[i], b.entries[i]))
            return false;
    return true;
}

FoliatedKForm form(const LocalPresentation& p, int k, std::vector<const char*> entries)
{
    FoliatedKForm f = zero_form(p, k);
    REQUIRE(entries.size() == f.entries.size());
    for (size_t i = 0; i < entries.size(); ++i)
        f.entries[i] = parse_expr(entries[i], p.chart);
    return f;
}

Distribution exp_frame()
{
    return Distribution(fx::xy(), {fx::field(fx::xy(), {"1", "0"}), fx::field(fx::xy(), {"0", "exp(x)"})}, "exp");
}

} // namespace

TEST_CASE("index sets")
{
    CHECK(k_subsets(4, 2) == std::vector<IndexSet>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    CHECK(k_subsets(3, 0) == std::vector<IndexSet>{{}});
    CHECK(k_subsets(2, 3).empty());
    LocalPresentation p = LocalPresentation::of(fx::gl2());
    FoliatedKForm f = form(p, 2, {"1", "2", "3", "4", "5", "6"});
    CHECK(identical(f.at({1, 0}), Expr(-1)));
    CHECK(identical(f.at({3, 1}), Expr(-5)));
    CHECK(f.at({2, 2}).is_zero());
}

TEST_CASE("degree zero is the horizontal differential")
{
    for (const auto& d : {fx::flat_plane(), fx::gl2(), exp_frame()}) {
        LocalPresentation p = LocalPresentation::of(d);
        StructureCoefficients sc = structure_coefficients(d);
        Expr u = E("x^2*y + exp(y)");
        FoliatedKForm du = ce_differential(function_form(p, u), sc);
        DualSection h = horizontal_differential(u, p);
        REQUIRE(du.entries.size() == h.realization.size());
        for (size_t a = 0; a < du.entries.size(); ++a)
            CHECK(identical(du.entries[a], h.realization[a]));
    }
    LocalPresentation flat = LocalPresentation::of(fx::flat_plane());
    FoliatedKForm du = ce_differential(function_form(flat, E("x*y^2")), structure_coefficients(fx::flat_plane()));
    CHECK(same(du, form(flat, 1, {"y^2", "2*x*y"})));
}

TEST_CASE("classical de Rham on the plane")
{
    LocalPresentation p = LocalPresentation::of(fx::flat_plane());
    StructureCoefficients sc = structure_coefficients(fx::flat_plane());
    FoliatedKForm eta = realize_form(CoordinateForm{fx::xy(), 1, {E("0"), E("x")}}, p);
    CHECK(same(eta, form(p, 1, {"0", "x"})));
    CHECK(same(ce_differential(eta, sc), form(p, 2, {"1"})));
    CHECK_THROWS_AS(ce_differential(form(p, 2, {"1"}), sc), Error);
    try {
        ce_differential(form(p, 2, {"1"}), sc);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegreeOverflow);
    }
}

TEST_CASE("GL(2): d of the realized dx cancels against the bracket part")
{
    LocalPresentation p = LocalPresentation::of(fx::gl2());
    StructureCoefficients sc = structure_coefficients(fx::gl2());
    FoliatedKForm eta = realize_form(CoordinateForm{fx::xy(), 1, {E("1"), E("0")}}, p);
    // dx(X1..X4) for X1 = x d_x, X2 = x d_y, X3 = y d_x, X4 = y d_y.
    CHECK(same(eta, form(p, 1, {"x", "0", "y", "0"})));
    FoliatedKForm anchor_only = ce_differential(eta, commuting_coefficients(fx::xy(), 4));
    CHECK_FALSE(all_zero(anchor_only));
    // On {1,3}: X1(y) - X3(x) = -y, and the bracket term -c^3_13 eta_3 = +y.
    CHECK(identical(anchor_only.at({0, 2}), E("-y")));
    FoliatedKForm d_eta = ce_differential(eta, sc);
    CHECK(all_zero(d_eta));
    CHECK(all_zero(ce_differential(d_eta, sc)));
}

TEST_CASE("operator matrices agree with the entrywise formula")
{
    for (const auto& d : {fx::flat_plane(), fx::gl2(), exp_frame()}) {
        LocalPresentation p = LocalPresentation::of(d);
        StructureCoefficients sc = structure_coefficients(d);
        const char* pool[] = {"x*y", "y^2 + 1", "exp(x)*y", "x - 3*y^3", "x^2", "7", "y*exp(y)"};
        for (int k = 0; k + 1 <= p.rank(); ++k) {
            FoliatedKForm eta = zero_form(p, k);
            for (size_t i = 0; i < eta.entries.size(); ++i)
                eta.entries[i] = E(pool[(i * 3 + static_cast<size_t>(k)) % 7]);
            CHECK(same(apply(ce_operator(p, sc, k), eta), ce_differential(eta, sc)));
        }
    }
}

TEST_CASE("d squared vanishes")
{
    LocalPresentation gl = LocalPresentation::of(fx::gl2());
    ComplexReport r = d_squared_check(gl, structure_coefficients(fx::gl2()), 2);
    CHECK(r.d_squared_zero == std::vector<bool>{true, true, true});
    CHECK(r.corpus_failures == std::vector<int>{0, 0, 0});
    CHECK(r.naturality_failures == std::vector<int>{0, 0, 0});
    CHECK(r.realization_constrained == std::vector<int>{3, 4});
    CHECK(r.all_zero());
    CHECK(r.d.size() == 4);

    ComplexReport flat = d_squared_check(LocalPresentation::of(fx::flat_plane()), structure_coefficients(fx::flat_plane()), 0);
    CHECK(flat.all_zero());
    CHECK(flat.realization_constrained.empty());
    ComplexReport ex = d_squared_check(LocalPresentation::of(exp_frame()), structure_coefficients(exp_frame()), 0);
    CHECK(ex.all_zero());

    CHECK_THROWS_AS(d_squared_check(gl, structure_coefficients(fx::gl2()), 3), Error);

    // Negative control: a wrong table breaks naturality and d^2.
    StructureCoefficients bad = structure_coefficients(fx::gl2());
    bad.table[0][1][1] = Expr(2);
    bad.table[1][0][1] = Expr(-2);
    ComplexReport wrong = d_squared_check(gl, bad, 1);
    CHECK_FALSE(wrong.all_zero());
    CHECK(wrong.naturality_failures[0] == 0); // degree zero never sees the table
    CHECK(wrong.naturality_failures[1] > 0);
}

TEST_CASE("Hodge Laplacian in degree zero is the horizontal Laplacian")
{
    std::vector<Density> densities{Density::lebesgue(fx::xy()), Density(fx::xy(), E("exp(x)")),
                                   Density(fx::xy(), E("1 + y^2"))};
    for (const auto& d : {fx::flat_plane(), fx::gl2(), exp_frame()})
        for (const auto& mu : densities) {
            LocalPresentation p = LocalPresentation::of(d);
            HodgeLaplacian h = hodge_laplacian(0, p, structure_coefficients(d), mu);
            CHECK(identical(h.op.entries[0][0], horizontal_laplacian(p, mu).op));
        }
    // Non-identity frame metric on the plane.
    LocalPresentation g(fx::xy(), fx::xy().region, fx::flat_plane().generators, {{E("2"), E("0")}, {E("0"), E("1")}});
    HodgeLaplacian h = hodge_laplacian(0, g, structure_coefficients(fx::flat_plane()), Density::lebesgue(fx::xy()));
    CHECK(identical(h.op.entries[0][0], composed_laplacian(g, Density::lebesgue(fx::xy()))));
    ExprMat h1 = exterior_gram(g, 1), h2 = exterior_gram(g, 2);
    CHECK(identical(h1[0][0], parse_expr("1/2", fx::xy())));
    CHECK(identical(h2[0][0], parse_expr("1/2", fx::xy())));
}

TEST_CASE("flat Hodge Laplacian acts componentwise")
{
    LocalPresentation p = LocalPresentation::of(fx::flat_plane());
    StructureCoefficients sc = structure_coefficients(fx::flat_plane());
    DiffOperator minus_lap = DiffOperator::derivative(fx::xy(), {2, 0}, Expr(-1)) +
                             DiffOperator::derivative(fx::xy(), {0, 2}, Expr(-1));
    for (int k = 0; k <= 2; ++k) {
        HodgeLaplacian h = hodge_laplacian(k, p, sc, Density::lebesgue(fx::xy()));
        for (size_t i = 0; i < h.op.entries.size(); ++i)
            for (size_t j = 0; j < h.op.entries.size(); ++j) {
                if (i == j)
                    CHECK(identical(h.op.entries[i][j], minus_lap));
                else
                    CHECK(h.op.entries[i][j].is_zero());
            }
    }
}

TEST_CASE("GL(2) Hodge Laplacian in degree one is symmetric and nonnegative")
{
    LocalPresentation p = LocalPresentation::of(fx::gl2());
    StructureCoefficients sc = structure_coefficients(fx::gl2());
    Density mu = Density::lebesgue(fx::xy());
    HodgeLaplacian h = hodge_laplacian(1, p, sc, mu);
    Box box{{-1.0, 1.0}, {-0.5, 1.5}};
    Expr b = bump(box);
    FoliatedKForm a = form(p, 1, {"1 + x", "y^2", "x*y", "2 - y"});
    FoliatedKForm c = form(p, 1, {"x^2", "1", "y - x", "x*y + 3"});
    for (auto& e : a.entries)
        e *= b;
    for (auto& e : c.entries)
        e *= b;
    double lhs = form_inner_product(apply(h.op, a), c, mu, box);
    double rhs = form_inner_product(a, apply(h.op, c), mu, box);
    CHECK(std::abs(lhs - rhs) < 1e-8 * std::max(1.0, std::abs(lhs)));
    CHECK(form_inner_product(apply(h.op, a), a, mu, box) >= -1e-12);
    CHECK(form_inner_product(apply(h.op, c), c, mu, box) >= -1e-12);

    // The quadratic form splits as |d a|^2 + |d* a|^2.
    double q = form_inner_product(apply(h.op, a), a, mu, box);
    FoliatedKForm da = apply(h.d_up, a), sa = apply(h.star_down, a);
    double split = form_inner_product(da, da, mu, box) + form_inner_product(sa, sa, mu, box);
    CHECK(q == doctest::Approx(split).epsilon(1e-9));
}
