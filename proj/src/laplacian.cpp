#include "hlap/laplacian.hpp"

#include "hlap/error.hpp"
#include "hlap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace hlap {

namespace {

ExprMat inverse_metric(const LocalPresentation& p)
{
    if (p.metric_is_identity())
        return identity_matrix(p.rank());
    return inverse(p.frame_metric, p.base_region);
}

MultiIndex unit_index(int n, int i)
{
    MultiIndex a(static_cast<size_t>(n), 0);
    a[static_cast<size_t>(i)] = 1;
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// Dual sections

DualSection horizontal_differential(const Expr& u, const LocalPresentation& p)
{
    DualSection s{p, {}};
    for (const auto& x : p.anchor)
        s.realization.push_back(apply(x, u));
    return s;
}

DualSection realize_dual(const OneForm& omega, const LocalPresentation& p)
{
    if (static_cast<int>(omega.coeffs.size()) != p.chart.dim())
        throw Error(ErrorKind::InvalidArgument, "one-form dimension mismatch");
    DualSection s{p, {}};
    for (const auto& x : p.anchor) {
        Expr acc;
        for (size_t i = 0; i < omega.coeffs.size(); ++i)
            acc += omega.coeffs[i] * x.coeffs[i];
        s.realization.push_back(acc);
    }
    return s;
}

Expr adjoint_differential(const DualSection& omega, const Density& mu)
{
    const LocalPresentation& p = omega.presentation;
    if (static_cast<int>(omega.realization.size()) != p.rank())
        throw Error(ErrorKind::InvalidArgument, "realization length differs from the rank");
    ExprVec w = matvec(inverse_metric(p), omega.realization);
    Expr out;
    for (int a = 0; a < p.rank(); ++a) {
        const VectorField& x = p.anchor[static_cast<size_t>(a)];
        out -= apply(x, w[static_cast<size_t>(a)]) + divergence(x, mu) * w[static_cast<size_t>(a)];
    }
    return out;
}

SmoothVerdict dual_section_smooth(const DualSection& omega, const Box& region)
{
    const LocalPresentation& p = omega.presentation;
    for (int a = 0; a < p.rank(); ++a)
        for (int i = 0; i < p.chart.dim(); ++i) {
            Expr prod = omega.realization[static_cast<size_t>(a)] *
                        p.anchor[static_cast<size_t>(a)].coeffs[static_cast<size_t>(i)];
            SmoothVerdict v = is_smooth_on(prod, region);
            if (!v.smooth) {
                v.reason = "component " + std::to_string(a) + " against axis " + std::to_string(i) + ": " + v.reason;
                return v;
            }
        }
    return {};
}

// ---------------------------------------------------------------------------
// Laplacian

DiffOperator divergence_form_laplacian(const Cometric& g, const Density& mu)
{
    const int n = g.chart.dim();
    DiffOperator op(g.chart);
    const Expr inv_m = mu.weight.recip();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Expr& gij = g.matrix[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (gij.is_zero())
                continue;
            MultiIndex second = unit_index(n, i);
            second[static_cast<size_t>(j)] += 1;
            op.add_term(second, -gij);
            Expr first = mu.is_lebesgue() ? differentiate(gij, i)
                                          : differentiate(mu.weight * gij, i) * inv_m;
            op.add_term(unit_index(n, j), -first);
        }
    return op;
}

DiffOperator composed_laplacian(const LocalPresentation& p, const Density& mu)
{
    ExprMat gi = inverse_metric(p);
    DiffOperator op(p.chart);
    for (int a = 0; a < p.rank(); ++a) {
        DiffOperator adj = formal_adjoint(p.anchor[static_cast<size_t>(a)], mu);
        for (int b = 0; b < p.rank(); ++b) {
            const Expr& c = gi[static_cast<size_t>(a)][static_cast<size_t>(b)];
            if (c.is_zero())
                continue;
            op = op + compose(adj, c * DiffOperator::from_field(p.anchor[static_cast<size_t>(b)]));
        }
    }
    return op;
}

HorizontalLaplacian horizontal_laplacian(const LocalPresentation& p, const Density& mu, bool allow_divergence_form)
{
    if (mu.chart.dim() != p.chart.dim())
        throw Error(ErrorKind::InvalidArgument, "density on a different chart");
    HorizontalLaplacian h;
    h.presentation = p;
    h.density = mu;
    ExprMat l;
    try {
        l = p.metric_is_identity() ? identity_matrix(p.rank()) : cholesky(inverse_metric(p), p.base_region);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonSymbolicCholesky || !allow_divergence_form)
            throw;
        h.factored = false;
        h.op = divergence_form_laplacian(induced_cometric(p), mu);
        return h;
    }
    h.factored = true;
    h.op = DiffOperator(p.chart);
    for (int b = 0; b < p.rank(); ++b) {
        VectorField xb = VectorField::zero(p.chart);
        for (int a = 0; a < p.rank(); ++a) {
            const Expr& c = l[static_cast<size_t>(a)][static_cast<size_t>(b)];
            if (!c.is_zero())
                xb = xb + c * p.anchor[static_cast<size_t>(a)];
        }
        DiffOperator adj = formal_adjoint(xb, mu);
        DiffOperator dx = DiffOperator::from_field(xb);
        h.op = h.op + compose(adj, dx);
        h.frame.push_back(xb);
        h.pairs.emplace_back(std::move(adj), std::move(dx));
    }
    return h;
}

// ---------------------------------------------------------------------------
// Symbols

Chart symbol_chart(const Chart& base)
{
    std::vector<std::string> names = base.names;
    Box region = base.region;
    for (const auto& s : base.names) {
        names.push_back("xi_" + s);
        region.push_back(Interval{});
    }
    return Chart(names, region);
}

SymbolFn principal_symbol(const HorizontalLaplacian& h)
{
    const Chart& c = h.presentation.chart;
    const int n = c.dim();
    SymbolFn s{symbol_chart(c), n, Expr(), SymbolFlavor::Manifold};
    if (h.factored) {
        for (const auto& x : h.frame) {
            Expr pair;
            for (int i = 0; i < n; ++i)
                pair += x.coeffs[static_cast<size_t>(i)] * Expr::coord(n + i);
            s.expr += pair * pair;
        }
        return s;
    }
    ExprMat g = induced_cometric(h.presentation).matrix;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            s.expr += g[static_cast<size_t>(i)][static_cast<size_t>(j)] * Expr::coord(n + i) * Expr::coord(n + j);
    return s;
}

SymbolFn operator_symbol(const DiffOperator& p)
{
    const int n = p.chart.dim();
    SymbolFn s{symbol_chart(p.chart), n, Expr(), SymbolFlavor::Manifold};
    const int top = p.order();
    for (const auto& [alpha, coeff] : p.terms) {
        int order = 0;
        Expr mono(1);
        for (int i = 0; i < n; ++i) {
            order += alpha[static_cast<size_t>(i)];
            mono *= Expr::coord(n + i).pow(alpha[static_cast<size_t>(i)]);
        }
        if (order == top)
            s.expr -= coeff * mono;
    }
    return s;
}

ExprMat symbol_matrix(const SymbolFn& s)
{
    const int n = s.base_dim;
    ExprMat m = zero_matrix(n, n);
    const Expr half(Rational(1, 2));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m[static_cast<size_t>(i)][static_cast<size_t>(j)] = half * differentiate(differentiate(s.expr, n + i), n + j);
    return m;
}

double longitudinal_symbol(const HorizontalLaplacian& h, const Distribution& f, const Point& p,
                           const std::vector<double>& xi, int jet_order)
{
    if (static_cast<int>(xi.size()) != f.size())
        throw Error(ErrorKind::InvalidArgument, "covector length differs from the generator count of F");
    FiberReport rep = fiber_dims(f, p, jet_order);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<Eigen::Index>(xi.size()));
    if (rep.relations.cols() > 0 && (rep.relations.transpose() * x).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + x.norm()))
        throw Error(ErrorKind::InvalidArgument, "covector does not vanish on the relations of F at the point");
    const LocalPresentation& pres = h.presentation;
    Eigen::VectorXd pulled(pres.rank());
    for (int a = 0; a < pres.rank(); ++a) {
        int found = -1;
        for (int j = 0; j < f.size() && found < 0; ++j)
            if (identical(f.generators[static_cast<size_t>(j)], pres.anchor[static_cast<size_t>(a)]))
                found = j;
        if (found < 0)
            throw Error(ErrorKind::InvalidArgument, "anchor field " + std::to_string(a) + " is not a generator of F");
        pulled(a) = x(found);
    }
    Eigen::MatrixXd gi = evaluate_matrix(inverse_metric(pres), p);
    return pulled.dot(gi * pulled);
}

// ---------------------------------------------------------------------------
// Quadrature checks

namespace {

// Derivatives of w = u * bump(box) at a point by the Leibniz rule over the
// factors u, b_0(x_0), ..., b_(n-1)(x_(n-1)). The product is never expanded
// symbolically, which for several variables would produce thousands of terms.
class BumpedJet {
public:
    BumpedJet(const Expr& u, const Box& box, int order) : n_(static_cast<int>(box.size())), order_(order)
    {
        for (const auto& beta : multi_indices(n_, order_)) {
            Expr d = u;
            for (int i = 0; i < n_; ++i)
                for (int k = 0; k < beta[static_cast<size_t>(i)]; ++k)
                    d = differentiate(d, i);
            slot_[beta] = du_.size();
            du_.emplace_back(d);
        }
        for (int i = 0; i < n_; ++i) {
            std::vector<CompiledExpr> row;
            Expr f = bump_factor(box, i);
            for (int k = 0; k <= order_; ++k) {
                row.emplace_back(f);
                f = differentiate(f, i);
            }
            db_.push_back(std::move(row));
        }
        u_.resize(du_.size());
        b_.assign(static_cast<size_t>(n_), std::vector<double>(static_cast<size_t>(order_) + 1));
    }

    void at(const Point& p)
    {
        for (size_t k = 0; k < du_.size(); ++k)
            u_[k] = du_[k](p);
        for (size_t i = 0; i < db_.size(); ++i)
            for (size_t k = 0; k < db_[i].size(); ++k)
                b_[i][k] = db_[i][k](p);
    }

    // d^alpha w at the last point, |alpha| <= order.
    double derivative(const MultiIndex& alpha) const
    {
        double sum = 0.0;
        MultiIndex beta(static_cast<size_t>(n_), 0);
        while (true) {
            double term = u_[slot_.at(beta)];
            for (size_t i = 0; i < beta.size(); ++i)
                term *= binomial(alpha[i], beta[i]) * b_[i][static_cast<size_t>(alpha[i] - beta[i])];
            sum += term;
            size_t i = 0;
            while (i < beta.size() && beta[i] == alpha[i])
                beta[i++] = 0;
            if (i == beta.size())
                return sum;
            ++beta[i];
        }
    }

    double value() const { return derivative(MultiIndex(static_cast<size_t>(n_), 0)); }

private:
    static double binomial(int n, int k)
    {
        double r = 1.0;
        for (int j = 1; j <= k; ++j)
            r = r * (n - k + j) / j;
        return r;
    }

    int n_;
    int order_;
    std::map<MultiIndex, size_t> slot_;
    std::vector<CompiledExpr> du_;
    std::vector<std::vector<CompiledExpr>> db_;
    std::vector<double> u_;
    std::vector<std::vector<double>> b_;
};

struct CompiledOperator {
    std::vector<std::pair<MultiIndex, CompiledExpr>> terms;

    explicit CompiledOperator(const DiffOperator& p)
    {
        for (const auto& [alpha, c] : p.terms)
            terms.emplace_back(alpha, CompiledExpr(c));
    }
    double apply(const Point& p, const BumpedJet& w) const
    {
        double s = 0.0;
        for (const auto& [alpha, c] : terms)
            s += c(p) * w.derivative(alpha);
        return s;
    }
};

// (X_a w)_a at the last jet point.
std::vector<double> frame_derivatives(const std::vector<std::vector<CompiledExpr>>& anchors, const Point& p,
                                      const BumpedJet& w, int n)
{
    std::vector<double> out;
    for (const auto& x : anchors) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            s += x[static_cast<size_t>(i)](p) * w.derivative(unit_index(n, i));
        out.push_back(s);
    }
    return out;
}

std::vector<std::vector<CompiledExpr>> compile_fields(const std::vector<VectorField>& fields)
{
    std::vector<std::vector<CompiledExpr>> out;
    for (const auto& x : fields) {
        std::vector<CompiledExpr> row;
        for (const auto& c : x.coeffs)
            row.emplace_back(c);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<std::vector<CompiledExpr>> compile_matrix(const ExprMat& m)
{
    std::vector<std::vector<CompiledExpr>> out;
    for (const auto& r : m) {
        std::vector<CompiledExpr> row;
        for (const auto& e : r)
            row.emplace_back(e);
        out.push_back(std::move(row));
    }
    return out;
}

int jet_order(const DiffOperator& p) { return std::max(1, p.order()); }

} // namespace

QuadratureCheck dirichlet_form_check(const HorizontalLaplacian& h, const Expr& u, const Box& box, int points)
{
    const int n = h.presentation.chart.dim();
    BumpedJet w(u, box, jet_order(h.op));
    CompiledOperator op(h.op);
    auto anchors = compile_fields(h.presentation.anchor);
    auto gi = compile_matrix(inverse_metric(h.presentation));
    CompiledExpr m(h.density.weight);
    QuadratureCheck r;
    r.lhs = integrate(
        [&](const Point& p) {
            w.at(p);
            return op.apply(p, w) * w.value() * m(p);
        },
        box, points);
    r.rhs = integrate(
        [&](const Point& p) {
            w.at(p);
            std::vector<double> xw = frame_derivatives(anchors, p, w, n);
            double s = 0.0;
            for (size_t a = 0; a < xw.size(); ++a)
                for (size_t b = 0; b < xw.size(); ++b)
                    s += xw[a] * gi[a][b](p) * xw[b];
            return s * m(p);
        },
        box, points);
    r.residual = std::fabs(r.lhs - r.rhs);
    return r;
}

QuadratureCheck symmetry_check(const HorizontalLaplacian& h, const Expr& u1, const Expr& u2, const Box& box,
                               int points)
{
    BumpedJet w1(u1, box, jet_order(h.op)), w2(u2, box, jet_order(h.op));
    CompiledOperator op(h.op);
    CompiledExpr m(h.density.weight);
    QuadratureCheck r;
    r.lhs = integrate(
        [&](const Point& p) {
            w1.at(p);
            w2.at(p);
            return op.apply(p, w1) * w2.value() * m(p);
        },
        box, points);
    r.rhs = integrate(
        [&](const Point& p) {
            w1.at(p);
            w2.at(p);
            return w1.value() * op.apply(p, w2) * m(p);
        },
        box, points);
    r.residual = std::fabs(r.lhs - r.rhs);
    return r;
}

// ---------------------------------------------------------------------------
// Partitions of unity and IMS

PartitionOfUnity trivial_partition(const Box& box)
{
    return PartitionOfUnity{{{box, Expr(1)}}};
}

PartitionOfUnity rational_partition(const Box& box, const std::vector<int>& axes)
{
    PartitionOfUnity pu{{{box, Expr(1)}}};
    for (int ax : axes) {
        const Interval& iv = box[static_cast<size_t>(ax)];
        if (!iv.bounded())
            throw Error(ErrorKind::InvalidArgument, "partition axis must be bounded");
        // t = (2 x - (lo + hi)) / (hi - lo) with exact rational endpoints.
        Rational lo(iv.lo), hi(iv.hi);
        Expr t = (Expr(Rational(2)) * Expr::coord(ax) - Expr(Rational(lo + hi))) * Expr(Rational(1 / (hi - lo)));
        Expr d = (Expr(1) + t * t).recip();
        Expr phi1 = (Expr(1) - t * t) * d;
        Expr phi2 = Expr(2) * t * d;
        PartitionOfUnity next;
        for (const auto& [b, phi] : pu.parts) {
            next.parts.emplace_back(b, phi * phi1);
            next.parts.emplace_back(b, phi * phi2);
        }
        pu = std::move(next);
    }
    return pu;
}

double partition_defect(const PartitionOfUnity& pu)
{
    if (pu.parts.empty())
        return INFINITY;
    Expr sum;
    for (const auto& part : pu.parts)
        sum += part.second * part.second;
    sum -= Expr(1);
    if (sum.is_zero())
        return 0.0;
    double worst = 0.0;
    for (const auto& p : sample_points(pu.parts.front().first, 64, 0x706f7531ULL))
        worst = std::max(worst, std::fabs(evaluate(sum, p)));
    return worst;
}

namespace {

void require_inside(const Box& inner, const Box& outer)
{
    for (size_t i = 0; i < inner.size(); ++i)
        if (inner[i].lo < outer[i].lo || inner[i].hi > outer[i].hi)
            throw Error(ErrorKind::SupportViolation, "partition support leaves the presentation base region");
}

} // namespace

ImsResult ims_localization_check(const HorizontalLaplacian& h, const PartitionOfUnity& pu)
{
    const Chart& c = h.presentation.chart;
    for (const auto& part : pu.parts)
        require_inside(part.first, h.presentation.base_region);
    ImsResult r;
    r.residual = h.op;
    const Expr half(Rational(1, 2));
    for (const auto& [box, phi] : pu.parts) {
        DiffOperator m = DiffOperator::multiplication(c, phi);
        DiffOperator cc = commutator(commutator(h.op, m), m);
        r.remainders_order_zero = r.remainders_order_zero && cc.order() <= 0;
        r.residual = r.residual - compose(m, compose(h.op, m)) - half * cc;
        r.double_commutators.push_back(std::move(cc));
    }
    return r;
}

DiffOperator assemble_global(const std::vector<HorizontalLaplacian>& patches, const PartitionOfUnity& pu)
{
    if (patches.size() != pu.parts.size())
        throw Error(ErrorKind::InvalidArgument, "one patch operator per partition function is required");
    for (size_t a = 0; a < patches.size(); ++a)
        for (size_t b = a + 1; b < patches.size(); ++b) {
            Box overlap = intersect(patches[a].presentation.base_region, patches[b].presentation.base_region);
            if (is_empty(overlap))
                continue;
            if (!identical(restrict_to(patches[a].op, overlap), restrict_to(patches[b].op, overlap)))
                throw Error(ErrorKind::NotEquivalent, "patch operators differ on an overlap");
        }
    const Chart& c = patches.front().presentation.chart;
    DiffOperator out(c);
    const Expr half(Rational(1, 2));
    for (size_t a = 0; a < patches.size(); ++a) {
        require_inside(pu.parts[a].first, patches[a].presentation.base_region);
        DiffOperator m = DiffOperator::multiplication(c, pu.parts[a].second);
        out = out + compose(m, compose(patches[a].op, m)) + half * commutator(commutator(patches[a].op, m), m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimate probe

EstimateProbe x_estimate_probe(const VectorField& x, const HorizontalLaplacian& h, const Box& box, int trials,
                               std::uint64_t seed, int points)
{
    MembershipResult m = module_membership(x, h.presentation.anchor, h.presentation.base_region,
                                           MembershipMode::Symbolic);
    if (!m.member || !m.certified)
        throw Error(ErrorKind::InvalidArgument, "probe field is not a certified member of the module");
    const int n = x.dim();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coef(-4, 4);
    const auto monos = multi_indices(n, 2);
    CompiledOperator op(h.op);
    auto field = compile_fields({x});
    CompiledExpr weight(h.density.weight);
    EstimateProbe out;
    for (int t = 0; t < trials; ++t) {
        Expr poly;
        for (const auto& alpha : monos) {
            Expr mono(coef(rng));
            for (int i = 0; i < n; ++i)
                mono *= Expr::coord(i).pow(alpha[static_cast<size_t>(i)]);
            poly += mono;
        }
        if (poly.is_zero())
            poly = Expr(1);
        BumpedJet u(poly, box, jet_order(h.op));
        double num = integrate(
            [&](const Point& p) {
                u.at(p);
                double xu = frame_derivatives(field, p, u, n)[0];
                return xu * xu * weight(p);
            },
            box, points);
        double quad = integrate(
            [&](const Point& p) {
                u.at(p);
                return op.apply(p, u) * u.value() * weight(p);
            },
            box, points);
        double l2 = integrate(
            [&](const Point& p) {
                u.at(p);
                return u.value() * u.value() * weight(p);
            },
            box, points);
        out.max_ratio = std::max(out.max_ratio, num / (quad + l2));
        ++out.trials;
    }
    return out;
}

} // namespace hlap
