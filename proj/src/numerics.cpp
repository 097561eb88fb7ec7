#include "hlap/numerics.hpp"

#include "hlap/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <ostream>
#include <random>

namespace hlap {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

Box grid_box(const Grid& g)
{
    Box b;
    for (const auto& a : g.axes)
        b.push_back({a.lo, a.hi});
    return b;
}

double checked_value(const CompiledExpr& c, const Point& p, const char* what)
{
    double v;
    try {
        v = c(p);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularPoint)
            throw;
        v = NAN;
    }
    if (!std::isfinite(v))
        throw Error(ErrorKind::CoefficientSingularOnGrid, std::string(what) + " is not finite at a grid node");
    return v;
}

void require_periodic(const Expr& e, const Grid& g, int axis)
{
    Box b = grid_box(g);
    CompiledExpr c(e);
    const double period = g.axes[static_cast<size_t>(axis)].hi - g.axes[static_cast<size_t>(axis)].lo;
    for (const auto& p : sample_points(b, 16, 0x9e71ULL + static_cast<std::uint64_t>(axis))) {
        Point q = p;
        q[static_cast<size_t>(axis)] += period;
        double a, s;
        try {
            a = c(p);
            s = c(q);
        } catch (const Error&) {
            throw Error(ErrorKind::CoefficientSingularOnGrid, "coefficient singular in the periodicity check");
        }
        if (std::abs(a - s) > 1e-9 * std::max(1.0, std::abs(a)))
            throw Error(ErrorKind::InvalidArgument, "coefficient not periodic along axis " + std::to_string(axis));
    }
}

// Neighbor of `flat` one step along `axis` in direction `step`, or -1 across
// a Dirichlet boundary.
long neighbor(const Grid& g, const std::vector<int>& idx, int axis, int step)
{
    std::vector<int> j = idx;
    const GridAxis& a = g.axes[static_cast<size_t>(axis)];
    int v = j[static_cast<size_t>(axis)] + step;
    if (a.bc == Boundary::Periodic)
        v = (v % a.n + a.n) % a.n;
    else if (v < 0 || v >= a.n)
        return -1;
    j[static_cast<size_t>(axis)] = v;
    return g.flat_index(j);
}

struct RowEntries {
    std::vector<long> cols;
    std::vector<double> vals;

    void add(long c, double v)
    {
        for (size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == c) {
                vals[i] += v;
                return;
            }
        cols.push_back(c);
        vals.push_back(v);
    }
};

SpMat build(long n, const std::vector<RowEntries>& rows)
{
    std::vector<Triplet> t;
    for (long p = 0; p < n; ++p)
        for (size_t i = 0; i < rows[static_cast<size_t>(p)].cols.size(); ++i)
            t.emplace_back(p, rows[static_cast<size_t>(p)].cols[i], rows[static_cast<size_t>(p)].vals[i]);
    SpMat m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

double gershgorin(const SpMat& s)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(s.rows());
    for (int k = 0; k < s.outerSize(); ++k)
        for (SpMat::InnerIterator it(s, k); it; ++it)
            rows[it.row()] += std::abs(it.value());
    return rows.maxCoeff();
}

// S = W^-1/2 K W^-1/2, the operator in the Euclidean picture.
SpMat symmetrized(const GridOperator& a)
{
    Eigen::VectorXd d = a.weights.cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * a.stiffness * d.asDiagonal();
}

double generalized_residual(const GridOperator& a, const Eigen::VectorXd& x, double lambda)
{
    Eigen::VectorXd v = a.weights.cwiseSqrt().cwiseInverse().cwiseProduct(x);
    Eigen::VectorXd wv = a.weights.cwiseProduct(v);
    return (a.stiffness * v - lambda * wv).norm() / wv.norm();
}

// exp(-tau S) y by Lanczos with full reorthogonalization.
Eigen::VectorXd lanczos_expv(const SpMat& s, const Eigen::VectorXd& y, double tau, int max_m, bool& converged)
{
    const long n = y.size();
    const double beta0 = y.norm();
    converged = true;
    if (beta0 == 0.0)
        return y;
    const int m_cap = static_cast<int>(std::min<long>(max_m, n));
    Eigen::MatrixXd v(n, m_cap + 1);
    std::vector<double> alpha, beta;
    v.col(0) = y / beta0;
    for (int j = 0; j < m_cap; ++j) {
        Eigen::VectorXd w = s * v.col(j);
        alpha.push_back(v.col(j).dot(w));
        w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
        w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
        double b = w.norm();
        const int m = j + 1;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<size_t>(i)];
            if (i + 1 < m)
                t(i, i + 1) = t(i + 1, i) = beta[static_cast<size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        Eigen::VectorXd e1 = Eigen::VectorXd::Zero(m);
        e1[0] = 1.0;
        Eigen::VectorXd c = es.eigenvectors() *
                            (-tau * es.eigenvalues()).array().exp().matrix().cwiseProduct(es.eigenvectors().transpose() * e1);
        // Invariant subspace found, or the a posteriori term is negligible.
        if (b < 1e-14 * std::abs(alpha.back()) + 1e-300 || b * std::abs(c[m - 1]) < 1e-14 * c.norm()) {
            return beta0 * (v.leftCols(m) * c);
        }
        if (j + 1 == m_cap) {
            converged = false;
            return beta0 * (v.leftCols(m) * c);
        }
        beta.push_back(b);
        v.col(j + 1) = w / b;
    }
    return y;
}

std::vector<double> axis_marginal(const Grid& g, const Eigen::VectorXd& weights, const Eigen::VectorXd& u, int axis)
{
    std::vector<double> m(static_cast<size_t>(g.axes[static_cast<size_t>(axis)].n), 0.0);
    for (long p = 0; p < g.size(); ++p)
        m[static_cast<size_t>(g.multi_index(p)[static_cast<size_t>(axis)])] += weights[p] * u[p];
    return m;
}

double tail_energy(const std::vector<double>& m, Boundary bc)
{
    const int n = static_cast<int>(m.size());
    double e = 0.0;
    if (bc == Boundary::Dirichlet) {
        std::vector<double> in = m, out(m.size());
        fftw_plan plan = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_RODFT00, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
        for (int k = n / 2; k < n; ++k)
            e += out[static_cast<size_t>(k)] * out[static_cast<size_t>(k)];
    } else {
        std::vector<std::complex<double>> in(m.begin(), m.end()), out(m.size());
        fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                          reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
        for (int k = 0; k < n; ++k)
            if (std::min(k, n - k) >= n / 4)
                e += std::norm(out[static_cast<size_t>(k)]);
    }
    return e;
}

} // namespace

double GridAxis::node(int i) const
{
    return bc == Boundary::Dirichlet ? lo + (i + 1) * h : lo + i * h;
}

Grid Grid::make(const Box& box, const std::vector<int>& n, const std::vector<Boundary>& bc)
{
    if (n.size() != box.size() || bc.size() != box.size())
        throw Error(ErrorKind::InvalidArgument, "grid specification does not match the box dimension");
    Grid g;
    for (size_t i = 0; i < box.size(); ++i) {
        if (!box[i].bounded())
            throw Error(ErrorKind::InvalidArgument, "grid box must be bounded");
        if (n[i] < 4)
            throw Error(ErrorKind::InvalidArgument, "grid needs at least 4 nodes per axis");
        GridAxis a;
        a.lo = box[i].lo;
        a.hi = box[i].hi;
        a.n = n[i];
        a.bc = bc[i];
        a.h = (a.hi - a.lo) / (bc[i] == Boundary::Dirichlet ? n[i] + 1 : n[i]);
        g.axes.push_back(a);
    }
    return g;
}

long Grid::size() const
{
    long s = 1;
    for (const auto& a : axes)
        s *= a.n;
    return s;
}

std::vector<int> Grid::multi_index(long flat) const
{
    std::vector<int> idx(axes.size());
    for (size_t i = axes.size(); i-- > 0;) {
        idx[i] = static_cast<int>(flat % axes[i].n);
        flat /= axes[i].n;
    }
    return idx;
}

long Grid::flat_index(const std::vector<int>& idx) const
{
    long f = 0;
    for (size_t i = 0; i < axes.size(); ++i)
        f = f * axes[i].n + idx[i];
    return f;
}

Point Grid::node(long flat) const
{
    std::vector<int> idx = multi_index(flat);
    Point p(axes.size());
    for (size_t i = 0; i < axes.size(); ++i)
        p[i] = axes[i].node(idx[i]);
    return p;
}

double Grid::cell_volume() const
{
    double v = 1.0;
    for (const auto& a : axes)
        v *= a.h;
    return v;
}

GridOperator discretize(const std::vector<VectorField>& frame, const Density& mu, const Grid& grid)
{
    const long n = grid.size();
    const int dim = grid.dim();
    if (mu.chart.dim() != dim)
        throw Error(ErrorKind::InvalidArgument, "density and grid dimensions differ");
    for (const auto& x : frame)
        if (x.dim() != dim)
            throw Error(ErrorKind::InvalidArgument, "field and grid dimensions differ");
    for (int a = 0; a < dim; ++a)
        if (grid.axes[static_cast<size_t>(a)].bc == Boundary::Periodic) {
            require_periodic(mu.weight, grid, a);
            for (const auto& x : frame)
                for (const auto& c : x.coeffs)
                    require_periodic(c, grid, a);
        }

    GridOperator op;
    op.grid = grid;
    op.weights.resize(n);
    std::vector<Point> nodes;
    nodes.reserve(static_cast<size_t>(n));
    for (long p = 0; p < n; ++p)
        nodes.push_back(grid.node(p));
    CompiledExpr cw(mu.weight);
    for (long p = 0; p < n; ++p) {
        double m = checked_value(cw, nodes[static_cast<size_t>(p)], "density");
        if (!(m > 0.0))
            throw Error(ErrorKind::CoefficientSingularOnGrid, "density not positive at a grid node");
        op.weights[p] = m * grid.cell_volume();
    }

    std::vector<Triplet> k;
    for (const auto& x : frame) {
        op.provenance.push_back(to_string(x));
        std::vector<CompiledExpr> cc;
        for (const auto& c : x.coeffs)
            cc.emplace_back(c);
        std::vector<RowEntries> fwd(static_cast<size_t>(n)), bwd(static_cast<size_t>(n));
        for (long p = 0; p < n; ++p) {
            std::vector<int> idx = grid.multi_index(p);
            auto& f = fwd[static_cast<size_t>(p)];
            auto& b = bwd[static_cast<size_t>(p)];
            for (int i = 0; i < dim; ++i) {
                double c = checked_value(cc[static_cast<size_t>(i)], nodes[static_cast<size_t>(p)], "field coefficient");
                if (c == 0.0)
                    continue;
                double s = c / grid.axes[static_cast<size_t>(i)].h;
                f.add(p, -s);
                if (long q = neighbor(grid, idx, i, +1); q >= 0)
                    f.add(q, s);
                b.add(p, s);
                if (long q = neighbor(grid, idx, i, -1); q >= 0)
                    b.add(q, -s);
            }
        }
        // Row p of D contributes w_p D_pi D_pj to K_ij; the (i, j) and (j, i)
        // contributions are equal products inserted in the same order.
        for (const auto* rows : {&fwd, &bwd})
            for (long p = 0; p < n; ++p) {
                const auto& r = (*rows)[static_cast<size_t>(p)];
                for (size_t i = 0; i < r.cols.size(); ++i)
                    for (size_t j = 0; j < r.cols.size(); ++j)
                        k.emplace_back(r.cols[i], r.cols[j], 0.5 * op.weights[p] * (r.vals[i] * r.vals[j]));
            }
        op.forward.push_back(build(n, fwd));
        op.backward.push_back(build(n, bwd));
    }
    op.stiffness.resize(n, n);
    op.stiffness.setFromTriplets(k.begin(), k.end());
    op.stiffness.makeCompressed();
    op.matrix = op.weights.cwiseInverse().asDiagonal() * op.stiffness;
    return op;
}

GridOperator discretize(const HorizontalLaplacian& h, const Grid& grid)
{
    if (!h.factored)
        throw Error(ErrorKind::InvalidArgument, "discretization needs the orthonormalized frame");
    return discretize(h.frame, h.density, grid);
}

double weighted_symmetry_check(const GridOperator& a)
{
    double worst = 0.0;
    for (int k = 0; k < a.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(a.matrix, k); it; ++it) {
            double lhs = it.value() * a.weights[it.row()];
            double rhs = a.matrix.coeff(it.col(), it.row()) * a.weights[it.col()];
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

double dirichlet_identity_defect(const GridOperator& a, const Eigen::VectorXd& u)
{
    double lhs = u.dot(a.weights.asDiagonal() * (a.matrix * u));
    double rhs = 0.0;
    Eigen::VectorXd sw = a.weights.cwiseSqrt();
    for (size_t b = 0; b < a.forward.size(); ++b)
        rhs += 0.5 * ((sw.cwiseProduct(a.forward[b] * u)).squaredNorm() + (sw.cwiseProduct(a.backward[b] * u)).squaredNorm());
    if (rhs == 0.0)
        return std::abs(lhs);
    return std::abs(lhs - rhs) / rhs;
}

Eigen::VectorXd sample_on_grid(const Expr& e, const Grid& grid)
{
    CompiledExpr c(e);
    Eigen::VectorXd v(grid.size());
    for (long p = 0; p < grid.size(); ++p)
        v[p] = checked_value(c, grid.node(p), "function");
    return v;
}

Spectrum low_spectrum(const GridOperator& a, int count, std::uint64_t seed)
{
    const long n = a.grid.size();
    if (count < 1 || count > n / 4)
        throw Error(ErrorKind::InvalidArgument, "eigenvalue count must lie in 1..dim/4");
    Spectrum out;
    SpMat s = symmetrized(a);
    if (n <= kDenseLimit) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(s)};
        out.method = "dense";
        for (int i = 0; i < count; ++i) {
            out.eigenvalues.push_back(es.eigenvalues()[i]);
            out.residuals.push_back(generalized_residual(a, es.eigenvectors().col(i), es.eigenvalues()[i]));
        }
        return out;
    }

    // Shift-invert block subspace iteration; the shift sits below the PSD spectrum.
    constexpr double sigma = -1.0;
    constexpr int kMaxIterations = 500;
    SpMat shifted = s;
    for (long i = 0; i < n; ++i)
        shifted.coeffRef(i, i) -= sigma;
    Eigen::SimplicialLDLT<SpMat> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorKind::NoConvergence, "factorization of the shifted operator failed");
    const int block = static_cast<int>(std::min<long>(n, 2L * count + 8));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < block; ++j)
            x(i, j) = unif(rng);
    out.method = "shift-invert subspace iteration";
    Eigen::VectorXd theta;
    for (int it = 1; it <= kMaxIterations; ++it) {
        Eigen::MatrixXd y = solver.solve(x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        Eigen::MatrixXd sq = s * q;
        Eigen::MatrixXd h = q.transpose() * sq;
        h = 0.5 * (h + h.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        x = q * es.eigenvectors();
        theta = es.eigenvalues();
        Eigen::MatrixXd sx = sq * es.eigenvectors();
        double worst = 0.0;
        for (int i = 0; i < count; ++i)
            worst = std::max(worst, (sx.col(i) - theta[i] * x.col(i)).norm());
        out.iterations = it;
        if (worst < 1e-10 * std::max(1.0, std::abs(theta[count - 1])))
            break;
    }
    for (int i = 0; i < count; ++i) {
        out.eigenvalues.push_back(theta[i]);
        out.residuals.push_back(generalized_residual(a, x.col(i), theta[i]));
    }
    for (double r : out.residuals)
        if (!(r < 1e-8))
            throw Error(ErrorKind::NoConvergence, "eigen residual " + std::to_string(r) + " after " +
                                                      std::to_string(out.iterations) + " iterations");
    return out;
}

Eigen::VectorXd heat_flow(const GridOperator& a, const Eigen::VectorXd& u0, double t)
{
    if (!(t >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "heat flow needs t >= 0");
    SpMat s = symmetrized(a);
    Eigen::VectorXd sw = a.weights.cwiseSqrt();
    Eigen::VectorXd y = sw.cwiseProduct(u0);
    // Substeps keep tau |S| <= 30, where 60 Lanczos steps resolve exp(-tau S).
    const double norm = gershgorin(s);
    const int steps = std::max(1, static_cast<int>(std::ceil(t * norm / 30.0)));
    const double tau = t / steps;
    for (int k = 0; k < steps; ++k) {
        bool ok = false;
        y = lanczos_expv(s, y, tau, 60, ok);
        if (!ok)
            throw Error(ErrorKind::NoConvergence, "Lanczos exponential did not converge");
    }
    return y.cwiseQuotient(sw);
}

Eigen::VectorXd grid_delta(const GridOperator& a, const Point& p)
{
    const Grid& g = a.grid;
    std::vector<int> idx(g.axes.size());
    for (size_t i = 0; i < g.axes.size(); ++i) {
        const GridAxis& ax = g.axes[i];
        double r = (p[i] - ax.lo) / ax.h - (ax.bc == Boundary::Dirichlet ? 1.0 : 0.0);
        int v = static_cast<int>(std::lround(r));
        idx[i] = ax.bc == Boundary::Periodic ? (v % ax.n + ax.n) % ax.n : std::clamp(v, 0, ax.n - 1);
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(g.size());
    long f = g.flat_index(idx);
    u[f] = 1.0 / a.weights[f];
    return u;
}

Eigen::VectorXd grid_step(const Grid& grid, int axis, double cut)
{
    Eigen::VectorXd u(grid.size());
    for (long p = 0; p < grid.size(); ++p)
        u[p] = grid.node(p)[static_cast<size_t>(axis)] > cut ? 1.0 : 0.0;
    return u;
}

std::vector<double> marginal_tail_energy(const Grid& grid, const Eigen::VectorXd& weights, const Eigen::VectorXd& u)
{
    std::vector<double> out;
    for (int a = 0; a < grid.dim(); ++a)
        out.push_back(tail_energy(axis_marginal(grid, weights, u, a), grid.axes[static_cast<size_t>(a)].bc));
    return out;
}

ProbeCurve smoothing_probe(const GridOperator& a, const std::vector<double>& times, const Eigen::VectorXd& u0)
{
    ProbeCurve c;
    c.initial_tail = marginal_tail_energy(a.grid, a.weights, u0);
    for (double t : times) {
        if (!(t > 0.0))
            throw Error(ErrorKind::InvalidArgument, "probe times must be positive");
        c.times.push_back(t);
        c.tail.push_back(marginal_tail_energy(a.grid, a.weights, heat_flow(a, u0, t)));
    }
    return c;
}

double ConsistencyResult::min_order() const
{
    return orders.empty() ? 0.0 : *std::min_element(orders.begin(), orders.end());
}

ConsistencyResult consistency_check(const HorizontalLaplacian& h, const Expr& u, const Box& box,
                                    const std::vector<int>& intervals)
{
    if (intervals.size() < 2)
        throw Error(ErrorKind::InvalidArgument, "consistency needs at least two refinements");
    const int dim = static_cast<int>(box.size());
    const int coarse = intervals.front();
    for (size_t i = 1; i < intervals.size(); ++i)
        if (intervals[i] % coarse != 0)
            throw Error(ErrorKind::InvalidArgument, "refinements must share the coarse nodes");
    CompiledExpr exact(apply(h.op, u));
    ConsistencyResult r;
    for (int m : intervals) {
        Grid g = Grid::make(box, std::vector<int>(static_cast<size_t>(dim), m - 1),
                            std::vector<Boundary>(static_cast<size_t>(dim), Boundary::Dirichlet));
        GridOperator op = discretize(h, g);
        Eigen::VectorXd au = op.matrix * sample_on_grid(u, g);
        const int ratio = m / coarse;
        double err = 0.0;
        Grid cg = Grid::make(box, std::vector<int>(static_cast<size_t>(dim), coarse - 1),
                             std::vector<Boundary>(static_cast<size_t>(dim), Boundary::Dirichlet));
        for (long p = 0; p < cg.size(); ++p) {
            Point x = cg.node(p);
            bool inner = true;
            for (int i = 0; i < dim; ++i) {
                const auto& ax = cg.axes[static_cast<size_t>(i)];
                double c = 0.5 * (ax.lo + ax.hi), half = 0.25 * (ax.hi - ax.lo);
                inner = inner && std::abs(x[static_cast<size_t>(i)] - c) <= half + 1e-12;
            }
            if (!inner)
                continue;
            std::vector<int> ci = cg.multi_index(p), fi(static_cast<size_t>(dim));
            for (int i = 0; i < dim; ++i)
                fi[static_cast<size_t>(i)] = (ci[static_cast<size_t>(i)] + 1) * ratio - 1;
            err = std::max(err, std::abs(au[g.flat_index(fi)] - exact(x)));
        }
        r.nodes_per_axis.push_back(m - 1);
        r.errors.push_back(err);
    }
    for (size_t i = 1; i < r.errors.size(); ++i)
        r.orders.push_back(std::log2(r.errors[i - 1] / r.errors[i]) / std::log2(double(intervals[i]) / intervals[i - 1]));
    return r;
}

void write_triplets(std::ostream& os, const Eigen::SparseMatrix<double>& m)
{
    os << std::setprecision(17);
    for (int k = 0; k < m.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

} // namespace hlap
