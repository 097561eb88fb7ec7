#include "hlap/isometry.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hlap {

namespace {

constexpr double kMapTol = 1e-10;

bool same_function(const Expr& a, const Expr& b, const Box& region)
{
    EqualResult r = equal(a, b, region);
    return r.equal && r.max_deviation < kMapTol;
}

void require_chart(const Chart& a, const Chart& b, const char* what)
{
    if (!(a == b))
        throw Error(ErrorKind::InvalidArgument, std::string(what) + " lives on a different chart");
}

Expr monomial(const MultiIndex& alpha)
{
    Expr m(1);
    for (size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] > 0)
            m *= Expr::coord(static_cast<int>(i)).pow(alpha[i]);
    return m;
}

Expr derivative(const Expr& e, const MultiIndex& beta)
{
    Expr r = e;
    for (size_t i = 0; i < beta.size(); ++i)
        for (int k = 0; k < beta[i] && !r.is_zero(); ++k)
            r = differentiate(r, static_cast<int>(i));
    return r;
}

bool below(const MultiIndex& b, const MultiIndex& a)
{
    for (size_t i = 0; i < a.size(); ++i)
        if (b[i] > a[i])
            return false;
    return true;
}

long factorial_of(const MultiIndex& a)
{
    long f = 1;
    for (int v : a)
        for (int k = 2; k <= v; ++k)
            f *= k;
    return f;
}

// Twelve test functions on the target chart mixing polynomial and exponential terms.
std::vector<Expr> commutation_corpus(int n)
{
    Expr a = Expr::coord(0), b = Expr::coord(1 % n), c = Expr::coord(n - 1);
    return {Expr(1),
            a,
            c,
            a * b,
            a.pow(2) + c,
            b * c.pow(2),
            (a + Expr(2) * c).pow(3),
            a.pow(2) * b.pow(2) - c,
            exp(a),
            exp(b) * c,
            exp(a + c),
            a * exp(Expr(-1) * b)};
}

} // namespace

Diffeo Diffeo::make(const Chart& src, const Chart& dst, ExprVec forward, ExprVec inverse)
{
    const int n = src.dim();
    if (dst.dim() != n || static_cast<int>(forward.size()) != n || static_cast<int>(inverse.size()) != n)
        throw Error(ErrorKind::InvalidArgument, "diffeomorphism dimensions do not match");
    Diffeo f;
    f.src = src;
    f.dst = dst;
    f.forward = std::move(forward);
    f.inverse = std::move(inverse);
    for (int i = 0; i < n; ++i) {
        if (!same_function(substitute(f.forward[static_cast<size_t>(i)], f.inverse), Expr::coord(i), dst.region))
            throw Error(ErrorKind::InvalidArgument, "forward o inverse is not the identity in coordinate " + dst.names[static_cast<size_t>(i)]);
        if (!same_function(substitute(f.inverse[static_cast<size_t>(i)], f.forward), Expr::coord(i), src.region))
            throw Error(ErrorKind::InvalidArgument, "inverse o forward is not the identity in coordinate " + src.names[static_cast<size_t>(i)]);
    }
    f.jacobian = zero_matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            f.jacobian[static_cast<size_t>(i)][static_cast<size_t>(j)] = differentiate(f.forward[static_cast<size_t>(i)], j);
    Expr det = determinant(f.jacobian, src.region);
    CompiledExpr cd(det);
    for (const auto& p : sample_points(src.region, 32, 0xd1ffULL))
        if (cd(p) == 0.0)
            throw Error(ErrorKind::InvalidArgument, "jacobian determinant vanishes at a sample point");
    return f;
}

Diffeo Diffeo::identity(const Chart& c)
{
    ExprVec id;
    for (int i = 0; i < c.dim(); ++i)
        id.push_back(Expr::coord(i));
    return make(c, c, id, id);
}

Diffeo Diffeo::inverted() const
{
    return make(dst, src, inverse, forward);
}

Diffeo compose(const Diffeo& f, const Diffeo& g)
{
    require_chart(g.dst, f.src, "outer map");
    ExprVec fwd, inv;
    for (const auto& e : f.forward)
        fwd.push_back(substitute(e, g.forward));
    for (const auto& e : g.inverse)
        inv.push_back(substitute(e, f.inverse));
    return Diffeo::make(g.src, f.dst, fwd, inv);
}

Expr pull_function(const Diffeo& f, const Expr& u)
{
    return substitute(u, f.forward);
}

VectorField pushforward(const Diffeo& f, const VectorField& x)
{
    require_chart(x.chart, f.src, "vector field");
    ExprVec v = matvec(f.jacobian, x.coeffs);
    for (auto& e : v)
        e = substitute(e, f.inverse);
    return VectorField(f.dst, v);
}

PreservationResult check_distribution_preserved(const Diffeo& f, const Distribution& d, const Distribution& d_prime)
{
    require_chart(d.chart, f.src, "source distribution");
    require_chart(d_prime.chart, f.dst, "target distribution");
    PreservationResult r;
    auto test = [&](const VectorField& pushed, const Distribution& into, std::vector<MembershipResult>& out,
                    const std::string& name) {
        MembershipResult m = module_membership(pushed, into.generators, into.chart.region, MembershipMode::Auto);
        if (!(m.member && m.certified) && r.preserved) {
            r.preserved = false;
            r.witness = name + " = " + to_string(pushed) + (m.certified ? " (certified non-member)" : " (not certified)");
        }
        out.push_back(std::move(m));
    };
    for (int a = 0; a < d.size(); ++a)
        test(pushforward(f, d.generators[static_cast<size_t>(a)]), d_prime, r.forward, "f_* X" + std::to_string(a + 1));
    Diffeo g = f.inverted();
    for (int b = 0; b < d_prime.size(); ++b)
        test(pushforward(g, d_prime.generators[static_cast<size_t>(b)]), d, r.backward,
             "f^-1_* X'" + std::to_string(b + 1));
    return r;
}

IsometryResult check_isometry(const Diffeo& f, const LocalPresentation& p, const LocalPresentation& p_prime)
{
    IsometryResult r;
    PreservationResult pres = check_distribution_preserved(f, p.as_distribution(), p_prime.as_distribution());
    r.preserved = pres.preserved;
    if (!r.preserved)
        return r;

    const int n = f.src.dim();
    ExprMat g = induced_cometric(p).matrix;
    ExprMat gp = induced_cometric(p_prime).matrix;
    ExprMat jgj = matmul(matmul(f.jacobian, g), transpose(f.jacobian));
    r.criterion = EqualityCriterion::Canonical;
    bool equal_all = true;
    std::vector<Point> samples = sample_points(f.src.region, 32, 0x150ULL);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Expr lhs = substitute(gp[static_cast<size_t>(i)][static_cast<size_t>(j)], f.forward);
            const Expr& rhs = jgj[static_cast<size_t>(i)][static_cast<size_t>(j)];
            EqualResult e = equal(lhs, rhs, f.src.region);
            if (!e.equal)
                equal_all = false;
            if (e.criterion == EqualityCriterion::Sampled && r.criterion == EqualityCriterion::Canonical)
                r.criterion = EqualityCriterion::Sampled;
            CompiledExpr cl(lhs), cr(rhs);
            for (const auto& x : samples)
                r.cometric_defect = std::max(r.cometric_defect, std::abs(cl(x) - cr(x)));
        }
    if (!equal_all)
        r.criterion = EqualityCriterion::Mismatch;

    // Fiber norms of a class and of its pushforward, expressed in the target
    // frame through the membership coefficients of the pushed anchors.
    std::mt19937_64 rng(0xf1be5ULL);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::vector<Point> spots = sample_points(p.base_region, 15, 0x5907ULL);
    spots.insert(spots.begin(), Point(static_cast<size_t>(n), 0.0));
    for (const auto& x : spots) {
        if (!contains(p.base_region, x))
            continue;
        std::vector<double> c(static_cast<size_t>(p.rank()));
        for (auto& v : c)
            v = coef(rng);
        Point y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            y[static_cast<size_t>(i)] = evaluate(f.forward[static_cast<size_t>(i)], x);
        std::vector<double> cp(static_cast<size_t>(p_prime.rank()), 0.0);
        for (int a = 0; a < p.rank(); ++a)
            for (int b = 0; b < p_prime.rank(); ++b)
                cp[static_cast<size_t>(b)] +=
                    c[static_cast<size_t>(a)] * evaluate(pres.forward[static_cast<size_t>(a)].coefficients[static_cast<size_t>(b)], y);
        try {
            double n1 = fiber_norm(p, x, c);
            double n2 = fiber_norm(p_prime, y, cp);
            r.fiber_norm_defect = std::max(r.fiber_norm_defect, std::abs(n1 - n2));
            ++r.fiber_checks;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::JetUnstable && e.kind() != ErrorKind::SingularPoint)
                throw;
        }
    }
    r.isometry = equal_all && r.cometric_defect < 1e-9 && r.fiber_norm_defect < 1e-8;
    return r;
}

Expr pullback_density_weight(const Diffeo& f, const Density& mu_prime)
{
    require_chart(mu_prime.chart, f.dst, "target density");
    Expr det = determinant(f.jacobian, f.src.region);
    // The sign of det J is constant on the connected region; fix it once.
    double s = evaluate(det, sample_points(f.src.region, 1, 0xd1ffULL).front());
    Expr abs_det = s > 0 ? det : -det;
    return substitute(mu_prime.weight, f.forward) * abs_det;
}

DiffOperator conjugate_operator(const Diffeo& f, const DiffOperator& p_prime)
{
    require_chart(p_prime.chart, f.dst, "target operator");
    const int n = f.src.dim();
    DiffOperator r(f.src);
    // P~ x^alpha = sum_{beta <= alpha} c_beta d^beta x^alpha, solved in graded order.
    for (const auto& alpha : multi_indices(n, std::max(p_prime.order(), 0))) {
        Expr m = monomial(alpha);
        Expr v = substitute(apply(p_prime, substitute(m, f.inverse)), f.forward);
        for (const auto& [beta, c] : r.terms)
            if (beta != alpha && below(beta, alpha))
                v -= c * derivative(m, beta);
        r.add_term(alpha, v * Expr(Rational(1, factorial_of(alpha))));
    }
    return r;
}

CommutationResult check_laplacian_commutation(const Diffeo& f, const DiffOperator& lap, const DiffOperator& lap_prime,
                                              const Density& mu, const Density& mu_prime)
{
    require_chart(lap.chart, f.src, "source operator");
    require_chart(mu.chart, f.src, "source density");
    CommutationResult r;
    Expr pulled = pullback_density_weight(f, mu_prime);
    if (!identical(pulled, mu.weight)) {
        CompiledExpr a(pulled), b(mu.weight);
        for (const auto& x : sample_points(f.src.region, 32, 0xde75ULL)) {
            double va = a(x), vb = b(x);
            r.density_defect = std::max(r.density_defect, std::abs(va - vb) / std::max(1.0, std::abs(vb)));
        }
        if (!(r.density_defect < 1e-10))
            throw Error(ErrorKind::DensityMismatch, "m'(f(x)) |det J| = " + to_string(pulled, f.src) +
                                                        " differs from " + to_string(mu.weight, f.src));
    }
    r.residual = conjugate_operator(f, lap_prime) - lap;
    for (const auto& u : commutation_corpus(f.dst.dim())) {
        ++r.corpus_size;
        Expr lhs = pull_function(f, apply(lap_prime, u));
        Expr rhs = apply(lap, pull_function(f, u));
        if (!identical(lhs, rhs))
            ++r.corpus_nonzero;
    }
    return r;
}

} // namespace hlap
