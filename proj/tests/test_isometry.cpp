#include "doctest.h"

#include "fixtures.hpp"
#include "hlap/error.hpp"
#include "hlap/isometry.hpp"

using namespace hlap;
using fx::E;

namespace {

ExprVec exprs(const Chart& c, std::vector<const char*> v)
{
    ExprVec out;
    for (const char* s : v)
        out.push_back(parse_expr(s, c));
    return out;
}

Diffeo shift_plane()
{
    return Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"x + 1", "y - 2"}), exprs(fx::xy(), {"x - 1", "y + 2"}));
}

// Rotation with cos = 3/5, sin = 4/5.
Diffeo rotation()
{
    return Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"3/5*x - 4/5*y", "4/5*x + 3/5*y"}),
                        exprs(fx::xy(), {"3/5*x + 4/5*y", "-4/5*x + 3/5*y"}));
}

Diffeo scaling()
{
    return Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"2*x", "2*y"}), exprs(fx::xy(), {"1/2*x", "1/2*y"}));
}

// Left translation by (a, b, c) = (1, -2, 1/3) in the Heisenberg group law.
Diffeo heisenberg_left()
{
    const Chart& c = fx::xyz();
    return Diffeo::make(c, c, exprs(c, {"x + 1", "y - 2", "z + 1/3 + 1/2*(y + 2*x)"}),
                        exprs(c, {"x - 1", "y + 2", "z - 1/3 - 1/2*(y + 2*x)"}));
}

} // namespace

TEST_CASE("diffeomorphism validation")
{
    CHECK_THROWS_AS(Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"x + 1", "y"}), exprs(fx::xy(), {"x + 1", "y"})),
                    Error);
    CHECK_NOTHROW(heisenberg_left());
    Diffeo r = rotation();
    CHECK(identical(r.jacobian[0][1], parse_expr("-4/5", fx::xy())));
    Diffeo back = compose(r.inverted(), r);
    CHECK(identical(back.forward[0], E("x")));
    CHECK(identical(back.forward[1], E("y")));
}

TEST_CASE("pushforward examples")
{
    CHECK(identical(pushforward(shift_plane(), VectorField::partial(fx::xy(), 0)), VectorField::partial(fx::xy(), 0)));
    VectorField radial = fx::field(fx::xy(), {"x", "y"});
    CHECK(identical(pushforward(rotation(), radial), radial));
    // Rotation turns d_x into cos d_x + sin d_y.
    CHECK(identical(pushforward(rotation(), VectorField::partial(fx::xy(), 0)), fx::field(fx::xy(), {"3/5", "4/5"})));
    for (const auto& x : fx::heisenberg().generators)
        CHECK(identical(pushforward(heisenberg_left(), x), x));
    // d_z is central and fixed as well.
    CHECK(identical(pushforward(heisenberg_left(), VectorField::partial(fx::xyz(), 2)), VectorField::partial(fx::xyz(), 2)));
}

TEST_CASE("pushforward is functorial and natural for brackets")
{
    Diffeo f = rotation(), g = shift_plane();
    Diffeo fg = compose(f, g);
    std::vector<VectorField> corpus{fx::field(fx::xy(), {"x*y", "1"}), fx::field(fx::xy(), {"exp(x)", "y^2"}),
                                    fx::field(fx::xy(), {"0", "x^3 - y"})};
    for (const auto& x : corpus) {
        CHECK(identical(pushforward(fg, x), pushforward(f, pushforward(g, x))));
        for (const auto& y : corpus)
            for (const Diffeo* h : {&f, &g, &fg})
                CHECK(identical(pushforward(*h, lie_bracket(x, y)), lie_bracket(pushforward(*h, x), pushforward(*h, y))));
    }
}

TEST_CASE("distribution preservation")
{
    CHECK(check_distribution_preserved(rotation(), fx::gl2(), fx::gl2()).preserved);
    CHECK(check_distribution_preserved(Diffeo::identity(fx::xy()), fx::gl2(), fx::gl2()).preserved);
    CHECK(check_distribution_preserved(scaling(), fx::gl2(), fx::gl2()).preserved);
    PreservationResult t = check_distribution_preserved(shift_plane(), fx::gl2(), fx::gl2());
    CHECK_FALSE(t.preserved);
    CHECK(t.witness.find("f_* X1") != std::string::npos);
    CHECK(check_distribution_preserved(heisenberg_left(), fx::heisenberg(), fx::heisenberg()).preserved);
    // Grushin's singular line x = 0 does not survive a shift in x.
    CHECK_FALSE(check_distribution_preserved(shift_plane(), fx::grushin(), fx::grushin()).preserved);
}

TEST_CASE("isometries")
{
    LocalPresentation gl = LocalPresentation::of(fx::gl2());
    IsometryResult rot = check_isometry(rotation(), gl, gl);
    CHECK(rot.isometry);
    CHECK(rot.criterion == EqualityCriterion::Canonical);
    CHECK(rot.fiber_checks >= 10);
    CHECK(rot.fiber_norm_defect < 1e-9);

    IsometryResult sc = check_isometry(scaling(), gl, gl);
    CHECK(sc.isometry);
    CHECK(sc.criterion == EqualityCriterion::Canonical);

    LocalPresentation h = LocalPresentation::of(fx::heisenberg());
    IsometryResult hl = check_isometry(heisenberg_left(), h, h);
    CHECK(hl.isometry);
    CHECK(hl.cometric_defect < 1e-12);

    CHECK(check_isometry(Diffeo::identity(fx::xy()), gl, gl).isometry);
    CHECK_FALSE(check_isometry(shift_plane(), gl, gl).preserved);

    // Stretching x preserves the Grushin module but not its metric.
    Diffeo stretch = Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"2*x", "y"}), exprs(fx::xy(), {"1/2*x", "y"}));
    LocalPresentation gr = LocalPresentation::of(fx::grushin());
    IsometryResult st = check_isometry(stretch, gr, gr);
    CHECK(st.preserved);
    CHECK_FALSE(st.isometry);
    CHECK(st.criterion == EqualityCriterion::Mismatch);
}

TEST_CASE("conjugated operators")
{
    DiffOperator lap = DiffOperator::derivative(fx::xy(), {2, 0}, Expr(-1)) + DiffOperator::derivative(fx::xy(), {0, 2}, Expr(-1));
    CHECK(identical(conjugate_operator(rotation(), lap), lap));
    CHECK(identical(conjugate_operator(shift_plane(), lap), lap));
    // Under x -> 2x, d/dx' pulls back to (1/2) d/dx.
    DiffOperator dx = DiffOperator::derivative(fx::xy(), {1, 0});
    CHECK(identical(conjugate_operator(scaling(), dx), DiffOperator::derivative(fx::xy(), {1, 0}, parse_expr("1/2", fx::xy()))));
    // x' d_y' pulls back to 2x * (1/2) d_y = x d_y.
    DiffOperator xdy = DiffOperator::derivative(fx::xy(), {0, 1}, E("x"));
    CHECK(identical(conjugate_operator(scaling(), xdy), xdy));
}

TEST_CASE("Laplacians commute with isometries")
{
    Density leb2 = Density::lebesgue(fx::xy());
    DiffOperator gl = horizontal_laplacian(LocalPresentation::of(fx::gl2()), leb2).op;

    CommutationResult id = check_laplacian_commutation(Diffeo::identity(fx::xy()), gl, gl, leb2, leb2);
    CHECK(id.residual.is_zero());
    CHECK(id.corpus_nonzero == 0);

    CommutationResult rot = check_laplacian_commutation(rotation(), gl, gl, leb2, leb2);
    CHECK(rot.residual.is_zero());
    CHECK(rot.corpus_size == 12);
    CHECK(rot.corpus_nonzero == 0);

    Density leb3 = Density::lebesgue(fx::xyz());
    DiffOperator hl = horizontal_laplacian(LocalPresentation::of(fx::heisenberg()), leb3).op;
    CommutationResult h = check_laplacian_commutation(heisenberg_left(), hl, hl, leb3, leb3);
    CHECK(h.residual.is_zero());
    CHECK(h.corpus_nonzero == 0);

    // Scaling by 2 needs mu' = 1/4 dx dy to pull back to dx dy.
    CHECK_THROWS_AS(check_laplacian_commutation(scaling(), gl, gl, leb2, leb2), Error);
    Density quarter(fx::xy(), parse_expr("1/4", fx::xy()));
    DiffOperator glq = horizontal_laplacian(LocalPresentation::of(fx::gl2()), quarter).op;
    CommutationResult s = check_laplacian_commutation(scaling(), gl, glq, leb2, quarter);
    CHECK(s.residual.is_zero());
    CHECK(s.corpus_nonzero == 0);

    // A non-isometry leaves a residual on both routes.
    Diffeo stretch = Diffeo::make(fx::xy(), fx::xy(), exprs(fx::xy(), {"2*x", "y"}), exprs(fx::xy(), {"1/2*x", "y"}));
    Density half(fx::xy(), parse_expr("1/2", fx::xy()));
    DiffOperator gr = horizontal_laplacian(LocalPresentation::of(fx::grushin()), leb2).op;
    DiffOperator grh = horizontal_laplacian(LocalPresentation::of(fx::grushin()), half).op;
    CommutationResult bad = check_laplacian_commutation(stretch, gr, grh, leb2, half);
    CHECK_FALSE(bad.residual.is_zero());
    CHECK(bad.corpus_nonzero > 0);
}
