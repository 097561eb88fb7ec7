#include "hlap/distribution.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace hlap {

Distribution::Distribution(Chart c, std::vector<VectorField> gens, std::string lbl)
    : chart(std::move(c)), generators(std::move(gens)), label(std::move(lbl))
{
    if (generators.empty())
        throw Error(ErrorKind::InvalidArgument, "a distribution needs at least one generator");
    for (const auto& g : generators)
        if (!(g.chart == chart) || static_cast<int>(g.coeffs.size()) != chart.dim())
            throw Error(ErrorKind::InvalidArgument, "generator not on the distribution chart");
}

namespace {

ExprMat columns_matrix(const std::vector<VectorField>& gens, int n)
{
    ExprMat m(static_cast<size_t>(n), ExprVec(gens.size()));
    for (size_t j = 0; j < gens.size(); ++j)
        for (int i = 0; i < n; ++i)
            m[static_cast<size_t>(i)][j] = gens[j].coeffs[static_cast<size_t>(i)];
    return m;
}

} // namespace

ExprMat Distribution::matrix() const
{
    return columns_matrix(generators, chart.dim());
}

LocalPresentation::LocalPresentation(Chart c, Box region, std::vector<VectorField> anchors, ExprMat g)
    : chart(std::move(c)), base_region(std::move(region)), anchor(std::move(anchors)), frame_metric(std::move(g))
{
    if (anchor.empty())
        throw Error(ErrorKind::InvalidArgument, "a presentation needs at least one anchor field");
    if (base_region.empty())
        base_region = chart.region;
    if (frame_metric.empty())
        frame_metric = identity_matrix(rank());
    if (static_cast<int>(frame_metric.size()) != rank())
        throw Error(ErrorKind::InvalidArgument, "frame metric size differs from the rank");
    for (int i = 0; i < rank(); ++i)
        for (int j = 0; j < i; ++j)
            if (!identical(frame_metric[static_cast<size_t>(i)][static_cast<size_t>(j)],
                           frame_metric[static_cast<size_t>(j)][static_cast<size_t>(i)]))
                throw Error(ErrorKind::InvalidArgument, "frame metric is not symmetric");
    if (!metric_is_identity()) {
        for (const auto& p : sample_points(base_region, 32, 0x6d657472ULL)) {
            Eigen::MatrixXd g = evaluate_matrix(frame_metric, p);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            if (es.eigenvalues().minCoeff() <= 0.0)
                throw Error(ErrorKind::InvalidArgument, "frame metric is not positive definite on the base region");
        }
    }
}

LocalPresentation LocalPresentation::of(const Distribution& d)
{
    return LocalPresentation(d.chart, d.chart.region, d.generators);
}

ExprMat LocalPresentation::anchor_matrix() const
{
    return columns_matrix(anchor, chart.dim());
}

bool LocalPresentation::metric_is_identity() const
{
    for (int i = 0; i < rank(); ++i)
        for (int j = 0; j < rank(); ++j)
            if (!identical(frame_metric[static_cast<size_t>(i)][static_cast<size_t>(j)], Expr(i == j ? 1 : 0)))
                return false;
    return true;
}

Distribution LocalPresentation::as_distribution() const
{
    Chart c = chart;
    c.region = base_region;
    std::vector<VectorField> gens;
    for (const auto& a : anchor)
        gens.emplace_back(c, a.coeffs);
    return Distribution(c, gens);
}

// ---------------------------------------------------------------------------
// Numeric rank

namespace {

// Orthonormal basis of the column space with singular values above `abs_cutoff`.
Eigen::MatrixXd column_basis(const Eigen::MatrixXd& m, double abs_cutoff)
{
    if (m.cols() == 0 || m.rows() == 0)
        return Eigen::MatrixXd(m.rows(), 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > abs_cutoff)
            ++r;
    return svd.matrixU().leftCols(r);
}

// Orthonormal basis of the null space, relative cutoff against sigma_max.
Eigen::MatrixXd null_basis(const Eigen::MatrixXd& m, double rel_cutoff)
{
    const Eigen::Index cols = m.cols();
    if (m.rows() == 0)
        return Eigen::MatrixXd::Identity(cols, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    double smax = s.size() ? s(0) : 0.0;
    Eigen::Index r = 0;
    if (smax > 0.0)
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > rel_cutoff * smax)
                ++r;
    return svd.matrixV().rightCols(cols - r);
}

// Basis of the intersection of two column spaces given by orthonormal bases.
Eigen::MatrixXd intersect_spaces(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::Index k = a.rows();
    if (a.cols() == 0 || b.cols() == 0)
        return Eigen::MatrixXd(k, 0);
    Eigen::MatrixXd m = 2.0 * Eigen::MatrixXd::Identity(k, k) - a * a.transpose() - b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < k; ++i)
        if (es.eigenvalues()(i) < 1e-8)
            keep.push_back(i);
    Eigen::MatrixXd out(k, static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    return out;
}

} // namespace

int numeric_rank(const Eigen::MatrixXd& m, double rel_cutoff)
{
    if (m.size() == 0)
        return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s(0) <= 0.0)
        return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_cutoff * s(0))
            ++r;
    return r;
}

Eigen::MatrixXd evaluate_matrix(const ExprMat& m, const Point& p)
{
    const Eigen::Index rows = static_cast<Eigen::Index>(m.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(m[0].size()) : 0;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            out(i, j) = evaluate(m[static_cast<size_t>(i)][static_cast<size_t>(j)], p);
    return out;
}

int evaluate_rank(const Distribution& d, const Point& p)
{
    if (static_cast<int>(p.size()) != d.chart.dim())
        throw Error(ErrorKind::InvalidArgument, "point dimension mismatch");
    return numeric_rank(evaluate_matrix(d.matrix(), p));
}

// ---------------------------------------------------------------------------
// Membership

namespace {

bool all_smooth(const ExprVec& v, const Box& region)
{
    for (const auto& e : v)
        if (!is_smooth_on(e, region).smooth)
            return false;
    return true;
}

bool all_polynomial(const ExprMat& a, const ExprVec& b)
{
    for (const auto& row : a)
        for (const auto& e : row)
            if (!is_polynomial(e))
                return false;
    for (const auto& e : b)
        if (!is_polynomial(e))
            return false;
    return true;
}

// Lexicographically ordered subsets of {0..k-1} of size r, at most `limit`.
std::vector<std::vector<int>> column_subsets(int k, int r, size_t limit)
{
    std::vector<std::vector<int>> out;
    std::vector<int> idx(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i)
        idx[static_cast<size_t>(i)] = i;
    while (out.size() < limit) {
        out.push_back(idx);
        int i = r - 1;
        while (i >= 0 && idx[static_cast<size_t>(i)] == k - r + i)
            --i;
        if (i < 0)
            break;
        ++idx[static_cast<size_t>(i)];
        for (int j = i + 1; j < r; ++j)
            idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
    }
    return out;
}

std::optional<MembershipResult> symbolic_membership(const ExprMat& a, const ExprVec& b, const Box& region)
{
    const int n = static_cast<int>(a.size());
    const int k = n ? static_cast<int>(a[0].size()) : 0;
    MembershipResult res;
    res.mode = MembershipMode::Symbolic;
    res.certified = true;

    LinearSolve s = solve_linear(a, b, region);
    if (!s.consistent) {
        res.member = false;
        res.certificate = "inconsistent";
        return res;
    }
    if (all_polynomial(a, b)) {
        int deg = 0;
        for (const auto& e : b)
            deg = std::max(deg, total_degree(e));
        if (auto c = polynomial_solve(a, b, n, std::min(deg + 1, 4))) {
            res.member = true;
            res.coefficients = *c;
            res.certificate = "polynomial";
            return res;
        }
    }
    if (all_smooth(s.particular, region)) {
        res.member = true;
        res.coefficients = s.particular;
        res.certificate = "particular";
        return res;
    }
    if (s.rank > 0 && s.rank < k) {
        for (const auto& cols : column_subsets(k, s.rank, 64)) {
            ExprMat sub(static_cast<size_t>(n), ExprVec(cols.size()));
            for (int i = 0; i < n; ++i)
                for (size_t j = 0; j < cols.size(); ++j)
                    sub[static_cast<size_t>(i)][j] = a[static_cast<size_t>(i)][static_cast<size_t>(cols[j])];
            LinearSolve t = solve_linear(sub, b, region);
            if (!t.consistent || t.rank != s.rank || !all_smooth(t.particular, region))
                continue;
            res.member = true;
            res.coefficients.assign(static_cast<size_t>(k), Expr());
            for (size_t j = 0; j < cols.size(); ++j)
                res.coefficients[static_cast<size_t>(cols[j])] = t.particular[j];
            res.certificate = "column-subset";
            return res;
        }
    }
    if (s.nullspace.empty()) {
        // The rational solution is unique, so any smooth solution would equal it.
        res.member = false;
        res.certificate = "unique-nonsmooth";
        return res;
    }
    return std::nullopt;
}

double sampled_residual(const ExprMat& a, const ExprVec& b, const Box& region)
{
    const int n = static_cast<int>(a.size());
    std::vector<Point> pts = grid_points(region, 5);
    for (auto& p : sample_points(region, 64, 0x6d656d62ULL))
        pts.push_back(std::move(p));
    ExprMat ab = a;
    for (int i = 0; i < n; ++i)
        ab[static_cast<size_t>(i)].push_back(b[static_cast<size_t>(i)]);
    double worst = 0.0;
    for (const auto& p : pts) {
        Eigen::MatrixXd m;
        try {
            m = evaluate_matrix(ab, p);
        } catch (const Error&) {
            continue; // pole locus of the inputs
        }
        Eigen::MatrixXd am = m.leftCols(m.cols() - 1);
        Eigen::VectorXd bv = m.col(m.cols() - 1);
        double bn = bv.norm();
        if (bn == 0.0)
            continue;
        Eigen::VectorXd c = am.completeOrthogonalDecomposition().solve(bv);
        worst = std::max(worst, (am * c - bv).norm() / bn);
    }
    return worst;
}

} // namespace

MembershipResult module_membership(const VectorField& x, const std::vector<VectorField>& gens, const Box& region,
                                   MembershipMode mode, double tol)
{
    const int n = x.dim();
    if (gens.empty())
        throw Error(ErrorKind::InvalidArgument, "membership needs at least one generator");
    ExprMat a = columns_matrix(gens, n);
    ExprVec b = x.coeffs;
    for (auto& row : a)
        for (auto& e : row)
            e = restrict_to(e, region);
    for (auto& e : b)
        e = restrict_to(e, region);

    if (mode != MembershipMode::Sampled) {
        if (auto r = symbolic_membership(a, b, region))
            return *r;
        if (mode == MembershipMode::Symbolic) {
            MembershipResult res;
            res.mode = MembershipMode::Symbolic;
            res.certificate = "no-smooth-solution-found";
            return res;
        }
    }
    MembershipResult res;
    res.mode = MembershipMode::Sampled;
    res.residual = sampled_residual(a, b, region);
    if (res.residual > tol && res.residual < 10.0 * tol)
        throw Error(ErrorKind::Inconclusive,
                    "sampled membership residual " + std::to_string(res.residual) + " lies between tol and 10 tol");
    res.member = res.residual <= tol;
    res.certificate = "sampled-least-squares";
    return res;
}

// ---------------------------------------------------------------------------
// Fibers

std::vector<std::pair<std::vector<int>, Box>> sector_boxes(const Point& p, const Box& region,
                                                           const std::vector<std::vector<double>>& cuts)
{
    const size_t n = p.size();
    std::vector<double> width(n, 1e-2);
    for (size_t i = 0; i < n; ++i) {
        if (i < cuts.size())
            for (double c : cuts[i])
                if (c != p[i])
                    width[i] = std::min(width[i], 0.5 * std::fabs(c - p[i]));
        width[i] = std::min(width[i], 0.5 * (region[i].hi - p[i]));
        width[i] = std::min(width[i], 0.5 * (p[i] - region[i].lo));
    }
    std::vector<std::pair<std::vector<int>, Box>> out;
    for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
        std::vector<int> sign(n);
        Box b(n);
        for (size_t i = 0; i < n; ++i) {
            sign[i] = (mask >> i) & 1 ? -1 : 1;
            b[i] = sign[i] > 0 ? Interval{p[i], p[i] + width[i]} : Interval{p[i] - width[i], p[i]};
        }
        out.emplace_back(std::move(sign), std::move(b));
    }
    return out;
}

namespace {

// Span of lambda in R^k such that sum lambda_j X_j agrees to jet order N with
// some sum f_j X_j where f_j(p) = 0. Unknowns: lambda, then the jets of f_j of
// orders 1..N. Equations: every Taylor coefficient of order <= N.
Eigen::MatrixXd jet_relations(const Distribution& d, const Point& p, int order)
{
    const int n = d.chart.dim();
    const int k = d.size();
    const auto idx = multi_indices(n, order);
    const int m = static_cast<int>(idx.size());
    auto pos = [&](const MultiIndex& a) {
        return static_cast<int>(std::find(idx.begin(), idx.end(), a) - idx.begin());
    };
    // jets[j][i][beta]
    std::vector<std::vector<std::vector<double>>> jets(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n; ++i) {
            std::vector<double> v(static_cast<size_t>(m));
            for (const auto& e : taylor_jet(d.generators[static_cast<size_t>(j)].coeffs[static_cast<size_t>(i)], p, order))
                v[static_cast<size_t>(pos(e.alpha))] = e.value;
            jets[static_cast<size_t>(j)].push_back(std::move(v));
        }
    const int unknowns = k + k * (m - 1);
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n * m, unknowns);
    for (int i = 0; i < n; ++i)
        for (int bi = 0; bi < m; ++bi) {
            const int row = i * m + bi;
            const MultiIndex& beta = idx[static_cast<size_t>(bi)];
            for (int j = 0; j < k; ++j) {
                sys(row, j) += jets[static_cast<size_t>(j)][static_cast<size_t>(i)][static_cast<size_t>(bi)];
                // -(f_j X_j^i)[beta] = -sum_{alpha <= beta, |alpha| >= 1} f_j[alpha] X_j^i[beta - alpha]
                for (int ai = 1; ai < m; ++ai) {
                    const MultiIndex& alpha = idx[static_cast<size_t>(ai)];
                    MultiIndex rest(static_cast<size_t>(n));
                    bool ok = true;
                    for (int c = 0; c < n; ++c) {
                        rest[static_cast<size_t>(c)] = beta[static_cast<size_t>(c)] - alpha[static_cast<size_t>(c)];
                        if (rest[static_cast<size_t>(c)] < 0)
                            ok = false;
                    }
                    if (!ok)
                        continue;
                    sys(row, k + j * (m - 1) + (ai - 1)) -=
                        jets[static_cast<size_t>(j)][static_cast<size_t>(i)][static_cast<size_t>(pos(rest))];
                }
            }
        }
    Eigen::MatrixXd null = null_basis(sys, kRankCutoff);
    return column_basis(null.topRows(k), kRankCutoff);
}

// Limits at p of the pointwise relation spaces ker[X_1(q) ... X_k(q)],
// intersected over all orthant sectors and several approach directions.
// Relations of the fiber must lie here: lambda - f(q) is a relation at q.
Eigen::MatrixXd limit_relations(const Distribution& d, const Point& p)
{
    const int n = d.chart.dim();
    const int k = d.size();
    std::vector<std::vector<double>> cuts(static_cast<size_t>(n));
    for (const auto& g : d.generators)
        for (const auto& e : g.coeffs) {
            auto bp = breakpoints(e, n);
            for (int i = 0; i < n; ++i)
                cuts[static_cast<size_t>(i)].insert(cuts[static_cast<size_t>(i)].end(), bp[static_cast<size_t>(i)].begin(),
                                                    bp[static_cast<size_t>(i)].end());
        }
    std::vector<std::vector<double>> dirs;
    dirs.emplace_back(static_cast<size_t>(n), 1.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> a(static_cast<size_t>(n), 1.0), b(static_cast<size_t>(n), 0.5);
        a[static_cast<size_t>(i)] = 0.25;
        b[static_cast<size_t>(i)] = 1.0;
        dirs.push_back(a);
        dirs.push_back(b);
    }
    const ExprMat r = d.matrix();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
    int samples = 0;
    for (const auto& [sign, box] : sector_boxes(p, d.chart.region, cuts)) {
        ExprMat rs = r;
        for (auto& row : rs)
            for (auto& e : row)
                e = restrict_to(e, box);
        LinearSolve s = solve_linear(rs, ExprVec(static_cast<size_t>(n)), box);
        if (s.nullspace.empty())
            return Eigen::MatrixXd(k, 0);
        for (const auto& dir : dirs) {
            Point q(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) {
                double w = box[static_cast<size_t>(i)].hi - box[static_cast<size_t>(i)].lo;
                q[static_cast<size_t>(i)] = p[static_cast<size_t>(i)] + 0.1 * w * sign[static_cast<size_t>(i)] * dir[static_cast<size_t>(i)];
            }
            Eigen::MatrixXd v(k, static_cast<Eigen::Index>(s.nullspace.size()));
            try {
                for (size_t c = 0; c < s.nullspace.size(); ++c)
                    for (int j = 0; j < k; ++j)
                        v(j, static_cast<Eigen::Index>(c)) = evaluate(s.nullspace[c][static_cast<size_t>(j)], q);
            } catch (const Error&) {
                continue;
            }
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                double nv = v.col(c).norm();
                if (nv > 0.0)
                    v.col(c) /= nv;
            }
            Eigen::MatrixXd basis = column_basis(v, 1e-12);
            acc += Eigen::MatrixXd::Identity(k, k) - basis * basis.transpose();
            ++samples;
        }
    }
    if (samples == 0)
        return Eigen::MatrixXd::Identity(k, k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(acc);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < k; ++i)
        if (es.eigenvalues()(i) < 1e-4 * samples)
            keep.push_back(i);
    Eigen::MatrixXd out(k, static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    return out;
}

std::vector<int> basis_modulo(const Eigen::MatrixXd& relations, int k)
{
    std::vector<int> chosen;
    Eigen::MatrixXd span = relations;
    int current = static_cast<int>(relations.cols());
    for (int j = 0; j < k; ++j) {
        Eigen::MatrixXd trial(k, span.cols() + 1);
        trial << span, Eigen::VectorXd::Unit(k, j);
        int r = static_cast<int>(column_basis(trial, 1e-9).cols());
        if (r > current) {
            chosen.push_back(j);
            span = trial;
            current = r;
        }
    }
    return chosen;
}

} // namespace

FiberReport fiber_report(const Distribution& d, const Point& p, int jet_order)
{
    if (jet_order < 1)
        throw Error(ErrorKind::InvalidArgument, "jet order must be at least 1");
    if (static_cast<int>(p.size()) != d.chart.dim() || !contains(d.chart.region, p))
        throw Error(ErrorKind::InvalidArgument, "point outside the chart region");
    const int k = d.size();
    FiberReport rep;
    rep.point = p;
    rep.jet_order_used = jet_order;
    rep.dim_Dx = evaluate_rank(d, p);
    Eigen::MatrixXd lim = limit_relations(d, p);
    Eigen::MatrixXd rel = intersect_spaces(jet_relations(d, p, jet_order), lim);
    Eigen::MatrixXd rel_next = intersect_spaces(jet_relations(d, p, jet_order + 1), lim);
    rep.relations = rel;
    rep.dim_fiber = k - static_cast<int>(rel.cols());
    rep.dim_fiber_next = k - static_cast<int>(rel_next.cols());
    rep.stable = rep.dim_fiber == rep.dim_fiber_next;
    rep.dim_kernel = rep.dim_fiber - rep.dim_Dx;
    rep.basis_indices = basis_modulo(rel, k);
    return rep;
}

FiberReport fiber_dims(const Distribution& d, const Point& p, int jet_order)
{
    FiberReport rep = fiber_report(d, p, jet_order);
    if (!rep.stable)
        throw Error(ErrorKind::JetUnstable, "fiber dimension " + std::to_string(rep.dim_fiber) + " at jet order " +
                                                std::to_string(jet_order) + " but " + std::to_string(rep.dim_fiber_next) +
                                                " at order " + std::to_string(jet_order + 1));
    return rep;
}

// ---------------------------------------------------------------------------
// Presentations

namespace {

bool generates_on(const Distribution& d, const std::vector<VectorField>& anchor, const Box& box)
{
    for (const auto& g : d.generators) {
        try {
            if (!module_membership(g, anchor, box).member)
                return false;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Inconclusive)
                return false;
            throw;
        }
    }
    return true;
}

} // namespace

LocalPresentation minimal_presentation(const Distribution& d, const Point& p, int jet_order)
{
    FiberReport rep = fiber_report(d, p, jet_order);
    if (!rep.stable)
        throw Error(ErrorKind::NoStableBasis, "fiber analysis unstable at jet orders " + std::to_string(jet_order) +
                                                  " and " + std::to_string(jet_order + 1));
    std::vector<VectorField> anchor;
    for (int j : rep.basis_indices)
        anchor.push_back(d.generators[static_cast<size_t>(j)]);
    const int n = d.chart.dim();

    std::vector<Box> candidates{d.chart.region};
    // Cell of the breakpoint arrangement containing p; cuts through p are ignored.
    Box cell = d.chart.region;
    for (const auto& g : d.generators)
        for (const auto& e : g.coeffs) {
            auto bp = breakpoints(e, n);
            for (int i = 0; i < n; ++i)
                for (double c : bp[static_cast<size_t>(i)]) {
                    auto& iv = cell[static_cast<size_t>(i)];
                    if (c < p[static_cast<size_t>(i)])
                        iv.lo = std::max(iv.lo, c);
                    else if (c > p[static_cast<size_t>(i)])
                        iv.hi = std::min(iv.hi, c);
                }
        }
    candidates.push_back(cell);
    for (double w = 1.0; w >= 1.0 / 1024; w *= 0.5) {
        Box b(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            b[static_cast<size_t>(i)] = {p[static_cast<size_t>(i)] - w, p[static_cast<size_t>(i)] + w};
        candidates.push_back(intersect(b, cell));
    }
    for (const auto& box : candidates) {
        if (is_empty(box) || !contains(box, p))
            continue;
        if (generates_on(d, anchor, box))
            return LocalPresentation(d.chart, box, anchor);
    }
    throw Error(ErrorKind::NoStableBasis, "no sampled neighbourhood on which the fiber basis generates");
}

TransitionResult transition_on(const LocalPresentation& src, const LocalPresentation& dst, const Box& region)
{
    if (is_empty(region))
        throw Error(ErrorKind::NotEquivalent, "presentations do not overlap");
    TransitionResult out;
    out.overlap = region;
    for (int i = 0; i < src.rank(); ++i) {
        MembershipResult m = module_membership(src.anchor[static_cast<size_t>(i)], dst.anchor, region,
                                               MembershipMode::Symbolic);
        if (!m.member || !m.certified)
            throw Error(ErrorKind::NotEquivalent,
                        "anchor " + std::to_string(i) + " has no membership certificate (" + m.certificate + ")");
        out.matrix.push_back(m.coefficients);
    }
    return out;
}

TransitionResult transition_matrix(const LocalPresentation& src, const LocalPresentation& dst)
{
    return transition_on(src, dst, intersect(src.base_region, dst.base_region));
}

TransitionResult transition_matrix(const LocalPresentation& src, const LocalPresentation& dst, const Point& x)
{
    TransitionResult out = transition_matrix(src, dst);
    Eigen::MatrixXd rd = evaluate_matrix(dst.anchor_matrix(), x);
    if (numeric_rank(rd) == dst.rank()) {
        // Second route: pointwise least squares against the evaluated anchors.
        Eigen::MatrixXd rs = evaluate_matrix(src.anchor_matrix(), x);
        Eigen::MatrixXd sol = rd.colPivHouseholderQr().solve(rs); // dst.rank x src.rank
        Eigen::MatrixXd a = evaluate_matrix(out.matrix, x);
        out.pointwise_checked = true;
        out.pointwise_deviation = (a - sol.transpose()).cwiseAbs().maxCoeff();
    }
    return out;
}

EquivalenceWitness pullback_equivalence(const LocalPresentation& a, const LocalPresentation& b, const Point& x,
                                        const Distribution& d)
{
    if (!contains(a.base_region, x) || !contains(b.base_region, x))
        throw Error(ErrorKind::NotEquivalent, "point outside a base region");
    LocalPresentation m = minimal_presentation(d, x);
    Box region = intersect(intersect(a.base_region, b.base_region), m.base_region);
    TransitionResult ta = transition_on(a, m, region);
    TransitionResult tb = transition_on(b, m, region);
    // Pairs (u, v) with u^T anchor_a = v^T anchor_b, detected through the
    // minimal frame: T_a^T u = T_b^T v.
    const int ra = a.rank(), rb = b.rank(), rm = m.rank();
    ExprMat sys(static_cast<size_t>(rm), ExprVec(static_cast<size_t>(ra + rb)));
    for (int r = 0; r < rm; ++r) {
        for (int i = 0; i < ra; ++i)
            sys[static_cast<size_t>(r)][static_cast<size_t>(i)] = ta.matrix[static_cast<size_t>(i)][static_cast<size_t>(r)];
        for (int j = 0; j < rb; ++j)
            sys[static_cast<size_t>(r)][static_cast<size_t>(ra + j)] = -tb.matrix[static_cast<size_t>(j)][static_cast<size_t>(r)];
    }
    LinearSolve s = solve_linear(sys, ExprVec(static_cast<size_t>(rm)), region);
    EquivalenceWitness w;
    std::vector<VectorField> anchor;
    for (const auto& v : s.nullspace) {
        ExprVec pa(v.begin(), v.begin() + ra), pb(v.begin() + ra, v.end());
        VectorField f = VectorField::zero(a.chart);
        for (int i = 0; i < ra; ++i)
            f = f + pa[static_cast<size_t>(i)] * a.anchor[static_cast<size_t>(i)];
        anchor.push_back(f);
        w.proj_a.push_back(pa);
        w.proj_b.push_back(pb);
    }
    if (anchor.empty())
        throw Error(ErrorKind::NotEquivalent, "fiber product is trivial");
    w.witness = LocalPresentation(a.chart, region, anchor);
    // Commutativity: proj_a . anchor_a and proj_b . anchor_b agree pointwise.
    ExprMat ma = matmul(w.proj_a, transpose(a.anchor_matrix()));
    ExprMat mb = matmul(w.proj_b, transpose(b.anchor_matrix()));
    for (const auto& p : sample_points(region, 64, 0x70756c6cULL)) {
        try {
            Eigen::MatrixXd da = evaluate_matrix(ma, p), db = evaluate_matrix(mb, p);
            w.commutativity_residual = std::max(w.commutativity_residual, (da - db).cwiseAbs().maxCoeff());
        } catch (const Error&) {
            continue;
        }
    }
    return w;
}

} // namespace hlap
