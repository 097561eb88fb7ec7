#include "doctest.h"

#include "fixtures.hpp"
#include "hlap/error.hpp"
#include "hlap/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace hlap;
using fx::E;

namespace {

constexpr double kPi = std::numbers::pi;

Box square(double lo, double hi, int dim = 2)
{
    return Box(static_cast<size_t>(dim), Interval{lo, hi});
}

Grid dirichlet(const Box& b, int n)
{
    return Grid::make(b, std::vector<int>(b.size(), n), std::vector<Boundary>(b.size(), Boundary::Dirichlet));
}

HorizontalLaplacian lap(const Distribution& d, const Density& mu)
{
    return horizontal_laplacian(LocalPresentation::of(d), mu);
}

HorizontalLaplacian lap(const Distribution& d)
{
    return lap(d, Density::lebesgue(d.chart));
}

// -d^2 on the periodic line [0, 2 pi) with N nodes.
GridOperator periodic_line(int n)
{
    Grid g = Grid::make({Interval{0.0, 2 * kPi}}, {n}, {Boundary::Periodic});
    return discretize({VectorField::partial(fx::line(), 0)}, Density::lebesgue(fx::line()), g);
}

// Spectrum of the periodic second difference: (2 - 2 cos(2 pi k / N)) / h^2, sorted.
std::vector<double> closed_form(int n, double h)
{
    std::vector<double> v;
    for (int k = 0; k < n; ++k)
        v.push_back((2.0 - 2.0 * std::cos(2 * kPi * k / n)) / (h * h));
    std::sort(v.begin(), v.end());
    return v;
}

double max_asymmetry(const Eigen::SparseMatrix<double>& k)
{
    Eigen::SparseMatrix<double> d = k - Eigen::SparseMatrix<double>(k.transpose());
    double m = 0.0;
    for (int j = 0; j < d.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(d, j); it; ++it)
            m = std::max(m, std::abs(it.value()));
    return m;
}

Eigen::VectorXd random_vector(long n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i)
        v[i] = u(rng);
    return v;
}

} // namespace

TEST_CASE("grid geometry")
{
    Grid g = Grid::make(square(-1, 1), {4, 5}, {Boundary::Dirichlet, Boundary::Periodic});
    CHECK(g.size() == 20);
    CHECK(g.axes[0].h == doctest::Approx(0.4));
    CHECK(g.axes[1].h == doctest::Approx(0.4));
    CHECK(g.axes[0].node(0) == doctest::Approx(-0.6));
    CHECK(g.axes[1].node(0) == doctest::Approx(-1.0));
    CHECK(g.flat_index(g.multi_index(13)) == 13);
    CHECK(g.multi_index(7) == std::vector<int>{1, 2});
    CHECK_THROWS_AS(Grid::make(square(-1, 1), {3, 8}, {Boundary::Dirichlet, Boundary::Dirichlet}), Error);
    CHECK_THROWS_AS(Grid::make(unbounded_box(2), {8, 8}, {Boundary::Dirichlet, Boundary::Dirichlet}), Error);
}

TEST_CASE("periodic second difference matches its closed form")
{
    for (int n : {8, 16}) {
        GridOperator a = periodic_line(n);
        CHECK(max_asymmetry(a.stiffness) == 0.0);
        std::vector<double> exact = closed_form(n, 2 * kPi / n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(a.matrix)};
        for (int k = 0; k < n; ++k)
            CHECK(std::abs(es.eigenvalues()[k] - exact[static_cast<size_t>(k)]) < 1e-10);
        Spectrum s = low_spectrum(a, n / 4);
        for (int k = 0; k < n / 4; ++k)
            CHECK(std::abs(s.eigenvalues[static_cast<size_t>(k)] - exact[static_cast<size_t>(k)]) < 1e-10);
    }
    CHECK_THROWS_AS(low_spectrum(periodic_line(16), 5), Error);
}

TEST_CASE("iterative spectrum resolves multiplicities on a torus")
{
    const int n = 48;
    Grid g = Grid::make(square(0, 2 * kPi), {n, n}, {Boundary::Periodic, Boundary::Periodic});
    GridOperator a = discretize(fx::flat_plane().generators, Density::lebesgue(fx::xy()), g);
    REQUIRE(a.grid.size() > kDenseLimit);
    std::vector<double> line = closed_form(n, 2 * kPi / n), exact;
    for (double p : line)
        for (double q : line)
            exact.push_back(p + q);
    std::sort(exact.begin(), exact.end());
    Spectrum s = low_spectrum(a, 10);
    CHECK(s.method != "dense");
    for (size_t k = 0; k < 10; ++k) {
        CHECK(std::abs(s.eigenvalues[k] - exact[k]) < 1e-10);
        CHECK(s.residuals[k] < 1e-8);
    }
}

TEST_CASE("assembly invariants")
{
    Box b = square(-1, 1);
    GridOperator gr = discretize(lap(fx::grushin()), dirichlet(b, 31));
    CHECK(max_asymmetry(gr.stiffness) == 0.0);
    CHECK(weighted_symmetry_check(gr) < 1e-12);
    Spectrum s = low_spectrum(gr, 4);
    CHECK(s.eigenvalues[0] > 0.0);

    // A positive non-constant density enters through the weights.
    Density ex(fx::xy(), E("exp(x)"));
    GridOperator gl = discretize(lap(fx::gl2(), ex), dirichlet(b, 24));
    CHECK(max_asymmetry(gl.stiffness) == 0.0);
    CHECK(weighted_symmetry_check(gl) < 1e-12);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CHECK(dirichlet_identity_defect(gl, random_vector(gl.grid.size(), seed)) < 1e-12);
        CHECK(dirichlet_identity_defect(gr, random_vector(gr.grid.size(), seed)) < 1e-12);
    }
    Spectrum sg = low_spectrum(gl, 6);
    CHECK(sg.eigenvalues.front() >= -1e-9);

    GridOperator corrupted = gl;
    corrupted.matrix.coeffRef(3, 4) += 1e-3;
    CHECK(weighted_symmetry_check(corrupted) > 1e-6);

    GridOperator zero = discretize({}, Density::lebesgue(fx::xy()), dirichlet(b, 6));
    CHECK(zero.stiffness.nonZeros() == 0);
    CHECK(zero.matrix.nonZeros() == 0);
}

TEST_CASE("assembly rejects bad data")
{
    Box b = square(-1, 1);
    std::vector<Boundary> per{Boundary::Periodic, Boundary::Periodic};
    // x d_y is not periodic in x.
    CHECK_THROWS_WITH_AS(discretize(fx::grushin().generators, Density::lebesgue(fx::xy()), Grid::make(b, {8, 8}, per)),
                         doctest::Contains("periodic"), Error);
    CHECK_NOTHROW(discretize(fx::flat_plane().generators, Density::lebesgue(fx::xy()), Grid::make(b, {8, 8}, per)));
    std::vector<VectorField> singular{fx::field(fx::xy(), {"1/x", "0"})};
    try {
        discretize(singular, Density::lebesgue(fx::xy()), dirichlet(b, 7)); // x = 0 is a node
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CoefficientSingularOnGrid);
    }
    try {
        discretize(fx::grushin().generators, Density(fx::xy(), E("1 + 1/x^2")), dirichlet(b, 7));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CoefficientSingularOnGrid);
    }
}

TEST_CASE("Heisenberg spectrum on a coarse box")
{
    GridOperator a = discretize(lap(fx::heisenberg()), dirichlet(square(-1, 1, 3), 16));
    CHECK(weighted_symmetry_check(a) < 1e-12);
    Spectrum s = low_spectrum(a, 6);
    CHECK(s.eigenvalues.front() >= 0.0);
    CHECK(std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end()));
    for (double r : s.residuals)
        CHECK(r < 1e-8);
}

TEST_CASE("Grushin ground state is mesh consistent")
{
    HorizontalLaplacian h = lap(fx::grushin());
    Box b = square(-1, 1);
    double coarse = low_spectrum(discretize(h, dirichlet(b, 64)), 1).eigenvalues[0];
    double fine = low_spectrum(discretize(h, dirichlet(b, 128)), 1).eigenvalues[0];
    CHECK(coarse > 0.0);
    CHECK(std::abs(coarse - fine) < 0.05 * fine);
}

TEST_CASE("second-order consistency")
{
    Box b = square(-1, 1);
    Expr u = E("exp(x/2)*(1 + y^2) + x^3*y");
    for (const Distribution& d : {fx::gl2(), fx::grushin()}) {
        ConsistencyResult r = consistency_check(lap(d), u, b);
        REQUIRE(r.errors.size() == 3);
        CHECK(r.errors[2] < r.errors[0]);
        CHECK(r.min_order() >= 1.9);
    }
}

TEST_CASE("heat probe")
{
    // Periodic -d^2 with a unit mass at node 0: the Fourier coefficients of the
    // weighted solution are exp(-lambda_k t).
    const int n = 32;
    GridOperator line = periodic_line(n);
    Eigen::VectorXd u0 = grid_delta(line, {0.0});
    CHECK(u0[0] * line.weights[0] == doctest::Approx(1.0));
    const double h = 2 * kPi / n;
    for (double t : {0.01, 0.05, 0.2}) {
        ProbeCurve c = smoothing_probe(line, {t}, u0);
        double tail = 0.0;
        for (int k = 0; k < n; ++k)
            if (std::min(k, n - k) >= n / 4)
                tail += std::exp(-2.0 * t * (2.0 - 2.0 * std::cos(2 * kPi * k / n)) / (h * h));
        CHECK(std::abs(c.tail[0][0] - tail) < 1e-10 * std::max(1.0, tail));
        CHECK(c.initial_tail[0] == doctest::Approx(n / 2 + 1));
    }
    CHECK_THROWS_AS(smoothing_probe(line, {0.0}, u0), Error);

    // Heat flow conserves mass and matches the spectral solution.
    Eigen::VectorXd u = heat_flow(line, u0, 0.3);
    CHECK(std::abs(line.weights.dot(u) - 1.0) < 1e-12);

    // Bracket-generating: both marginals lose their high modes.
    GridOperator gr = discretize(lap(fx::grushin()), dirichlet(square(-1, 1), 31));
    ProbeCurve g = smoothing_probe(gr, {0.01, 0.1}, grid_delta(gr, {0.0, 0.0}));
    for (int a = 0; a < 2; ++a) {
        CHECK(g.tail[1][static_cast<size_t>(a)] < 0.01 * g.initial_tail[static_cast<size_t>(a)]);
        CHECK(g.tail[1][static_cast<size_t>(a)] < g.tail[0][static_cast<size_t>(a)]);
    }

    // {d_x} alone: the y-marginal is invariant when x is periodic.
    Grid pg = Grid::make(square(-1, 1), {32, 31}, {Boundary::Periodic, Boundary::Dirichlet});
    GridOperator dx = discretize({VectorField::partial(fx::xy(), 0)}, Density::lebesgue(fx::xy()), pg);
    ProbeCurve f = smoothing_probe(dx, {0.1}, grid_delta(dx, {0.0, 0.0}));
    CHECK(std::abs(f.tail[0][1] - f.initial_tail[1]) < 1e-12 * f.initial_tail[1]);
    CHECK(f.tail[0][0] < 0.01 * f.initial_tail[0]);
}

TEST_CASE("triplet export")
{
    GridOperator a = periodic_line(4);
    std::ostringstream os;
    write_triplets(os, a.stiffness);
    std::istringstream is(os.str());
    int i, j, lines = 0;
    double v;
    while (is >> i >> j >> v) {
        CHECK(i >= 1);
        CHECK(j >= 1);
        CHECK(v == a.stiffness.coeff(i - 1, j - 1));
        ++lines;
    }
    CHECK(lines == a.stiffness.nonZeros());
}
