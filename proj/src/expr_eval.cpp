#include "expr_internal.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

namespace hlap {

using detail::Node;

// ---------------------------------------------------------------------------
// Compiled evaluator.
//
// Each term is evaluated as coeff * (product of algebraic factors) *
// exp(sum of transcendental exponents), so flatplus(x)^r * exp(s/x) never
// forms an overflowing intermediate.

namespace {

struct CFactor {
    AtomKind kind;
    int var;
    double e;
    int child; // node index for Exp/Base
    int ie;    // e as an integer when is_int
    bool is_int;
};

struct CTerm {
    double coeff;
    bool has_flat;
    std::vector<CFactor> f;
};

// Integer powers by squaring; exact for the small exponents of polynomials.
double ipow(double x, int k)
{
    bool inv = k < 0;
    unsigned n = static_cast<unsigned>(inv ? -k : k);
    double r = 1.0;
    while (n) {
        if (n & 1u)
            r *= x;
        x *= x;
        n >>= 1u;
    }
    return inv ? 1.0 / r : r;
}

double fpow(const CFactor& f, double x)
{
    return f.is_int ? ipow(x, f.ie) : std::pow(x, f.e);
}

struct CNode {
    bool pw = false;
    int var = -1;
    double cut = 0.0;
    int then_ = -1;
    int else_ = -1;
    std::vector<CTerm> terms;
};

} // namespace

struct CompiledExpr::Impl {
    std::vector<CNode> nodes;
    std::unordered_map<const Node*, int> index;

    int compile(const detail::NodePtr& n)
    {
        if (auto it = index.find(n.get()); it != index.end())
            return it->second;
        CNode c;
        if (n->pw) {
            c.pw = true;
            c.var = n->pw_var;
            c.cut = n->pw_cut.get_d();
            c.then_ = compile(n->pw_then);
            c.else_ = compile(n->pw_else);
        } else {
            for (const auto& t : n->terms) {
                CTerm ct{t.coeff.get_d(), false, {}};
                for (const auto& f : t.factors) {
                    int child = f.arg ? compile(f.arg) : -1;
                    bool is_int = f.exp.get_den() == 1 && abs(f.exp.get_num()) < 64;
                    int ie = is_int ? static_cast<int>(f.exp.get_num().get_si()) : 0;
                    ct.f.push_back({f.kind, f.var, f.exp.get_d(), child, ie, is_int});
                    ct.has_flat = ct.has_flat || f.kind == AtomKind::Flat;
                }
                c.terms.push_back(std::move(ct));
            }
        }
        nodes.push_back(std::move(c));
        int id = static_cast<int>(nodes.size()) - 1;
        index.emplace(n.get(), id);
        return id;
    }

    double eval(int id, const double* p) const
    {
        const CNode& c = nodes[static_cast<size_t>(id)];
        if (c.pw)
            return eval(p[c.var] > c.cut ? c.then_ : c.else_, p);
        double sum = 0.0;
        for (const auto& t : c.terms) {
            // A vanishing flatplus kills the term before any pole is examined.
            bool killed = false;
            if (t.has_flat)
                for (const auto& f : t.f)
                    if (f.kind == AtomKind::Flat && !(p[f.var] > 0.0))
                        killed = true;
            if (killed)
                continue;
            double prod = t.coeff;
            double expo = 0.0;
            for (const auto& f : t.f) {
                switch (f.kind) {
                case AtomKind::Coord: {
                    double x = p[f.var];
                    if (x == 0.0 && f.e < 0)
                        throw Error(ErrorKind::SingularPoint, "pole of a coordinate power");
                    prod *= fpow(f, x);
                    break;
                }
                case AtomKind::Flat:
                    expo -= f.e / p[f.var];
                    break;
                case AtomKind::Exp:
                    expo += eval(f.child, p);
                    break;
                case AtomKind::Base: {
                    double b = eval(f.child, p);
                    if (b == 0.0)
                        throw Error(ErrorKind::SingularPoint, "zero denominator");
                    prod *= fpow(f, b);
                    break;
                }
                }
            }
            sum += expo == 0.0 ? prod : prod * std::exp(expo);
        }
        return sum;
    }
};

CompiledExpr::CompiledExpr() : impl_(std::make_unique<Impl>())
{
    impl_->compile(Expr().node());
}

CompiledExpr::CompiledExpr(const Expr& e) : impl_(std::make_unique<Impl>())
{
    impl_->compile(e.node());
    impl_->index.clear();
}

CompiledExpr::~CompiledExpr() = default;
CompiledExpr::CompiledExpr(const CompiledExpr& o) : impl_(std::make_unique<Impl>(*o.impl_)) {}
CompiledExpr& CompiledExpr::operator=(const CompiledExpr& o)
{
    if (this != &o)
        impl_ = std::make_unique<Impl>(*o.impl_);
    return *this;
}
CompiledExpr::CompiledExpr(CompiledExpr&&) noexcept = default;
CompiledExpr& CompiledExpr::operator=(CompiledExpr&&) noexcept = default;

double CompiledExpr::operator()(const double* p) const
{
    // The root is compiled last.
    return impl_->eval(static_cast<int>(impl_->nodes.size()) - 1, p);
}

double CompiledExpr::operator()(const Point& p) const
{
    return (*this)(p.data());
}

double evaluate(const Expr& e, const Point& p)
{
    return CompiledExpr(e)(p);
}

// ---------------------------------------------------------------------------
// Jets

std::vector<MultiIndex> multi_indices(int n, int order)
{
    std::vector<MultiIndex> out;
    for (int d = 0; d <= order; ++d) {
        MultiIndex a(static_cast<size_t>(n), 0);
        // Enumerate compositions of d into n parts, lexicographically descending.
        std::vector<MultiIndex> level;
        std::function<void(int, int)> rec = [&](int i, int left) {
            if (i == n - 1) {
                a[static_cast<size_t>(i)] = left;
                level.push_back(a);
                return;
            }
            for (int v = left; v >= 0; --v) {
                a[static_cast<size_t>(i)] = v;
                rec(i + 1, left - v);
            }
        };
        if (n > 0)
            rec(0, d);
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

std::vector<JetEntry> taylor_jet(const Expr& e, const Point& p, int order)
{
    const int n = static_cast<int>(p.size());
    std::map<MultiIndex, Expr> deriv;
    MultiIndex zero(static_cast<size_t>(n), 0);
    deriv[zero] = e;
    std::vector<JetEntry> out;
    for (const auto& a : multi_indices(n, order)) {
        if (a != zero) {
            int i = 0;
            while (a[static_cast<size_t>(i)] == 0)
                ++i;
            MultiIndex parent = a;
            parent[static_cast<size_t>(i)] -= 1;
            deriv[a] = differentiate(deriv.at(parent), i);
        }
        double fact = 1.0;
        for (int v : a)
            for (int k = 2; k <= v; ++k)
                fact *= k;
        out.push_back({a, evaluate(deriv[a], p) / fact});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equality and zero tests

namespace {

constexpr int kEqualitySamples = 64;

// Value and absolute term scale at a point; nullopt on a singular point.
std::optional<std::pair<double, double>> value_and_scale(const Expr& e, const Point& p)
{
    try {
        if (e.is_piecewise()) {
            return value_and_scale(p[static_cast<size_t>(e.pw_var())] > e.pw_cut().get_d() ? e.pw_then() : e.pw_else(),
                                   p);
        }
        double v = 0.0, s = 0.0;
        for (const auto& t : e.terms()) {
            double tv = evaluate(Expr(detail::term_node(t)), p);
            v += tv;
            s += std::fabs(tv);
        }
        return std::make_pair(v, s);
    } catch (const Error& err) {
        if (err.kind() == ErrorKind::SingularPoint)
            return std::nullopt;
        throw;
    }
}

bool exact_rational(const detail::NodePtr& n)
{
    if (n->pw)
        return false;
    for (const auto& t : n->terms)
        for (const auto& f : t.factors) {
            if (f.kind == AtomKind::Flat || f.kind == AtomKind::Exp)
                return false;
            if (f.kind == AtomKind::Base && !exact_rational(f.arg))
                return false;
        }
    return true;
}

} // namespace

EqualResult equal(const Expr& a, const Expr& b, const Box& region, std::uint64_t seed)
{
    EqualResult r;
    Expr d = a - b;
    if (identical(a, b) || d.is_zero()) {
        r.equal = true;
        r.criterion = EqualityCriterion::Canonical;
        return r;
    }
    if (exact_rational(d.node())) {
        r.equal = false;
        r.criterion = EqualityCriterion::Mismatch;
        auto pts = sample_points(region, 8, seed);
        for (const auto& p : pts)
            if (auto vs = value_and_scale(d, p))
                r.max_deviation = std::max(r.max_deviation, std::fabs(vs->first));
        return r;
    }
    CompiledExpr ca(a), cb(b);
    int used = 0;
    for (const auto& p : sample_points(region, kEqualitySamples, seed)) {
        double va, vb;
        try {
            va = ca(p);
            vb = cb(p);
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::SingularPoint)
                continue;
            throw;
        }
        ++used;
        double dev = std::fabs(va - vb);
        double tol = 1e-10 * std::max({1.0, std::fabs(va), std::fabs(vb)});
        r.max_deviation = std::max(r.max_deviation, dev / std::max({1.0, std::fabs(va), std::fabs(vb)}));
        if (!(dev <= tol)) {
            r.equal = false;
            r.criterion = EqualityCriterion::Mismatch;
            return r;
        }
    }
    r.equal = used > 0;
    r.criterion = used > 0 ? EqualityCriterion::Sampled : EqualityCriterion::Mismatch;
    return r;
}

EqualResult equal(const Expr& a, const Expr& b, const Chart& chart, std::uint64_t seed)
{
    return equal(a, b, chart.region, seed);
}

bool is_zero_robust(const Expr& e, const Box& region)
{
    if (e.is_zero())
        return true;
    if (exact_rational(e.node()))
        return false;
    int used = 0;
    for (const auto& p : sample_points(region, 32, 0x2e40ULL)) {
        auto vs = value_and_scale(e, p);
        if (!vs)
            continue;
        ++used;
        if (std::fabs(vs->first) > 1e-11 * std::max(vs->second, 1e-300) && vs->second > 0.0)
            return false;
    }
    return used > 0;
}

// ---------------------------------------------------------------------------
// Smoothness

namespace {

bool straddles_zero(const Interval& iv)
{
    return iv.lo < 0.0 && iv.hi > 0.0;
}

SmoothVerdict smooth_rec(const Expr& e, const Box& box, int depth);

SmoothVerdict base_nonvanishing(const Expr& b, const Box& box)
{
    const size_t n = box.size();
    int per_axis = n <= 2 ? 9 : (n <= 3 ? 5 : 3);
    auto pts = grid_points(box, per_axis);
    auto rnd = sample_points(box, 64, 0xba5eULL);
    pts.insert(pts.end(), rnd.begin(), rnd.end());
    // Box corners and axis midpoints catch zeros sitting on the boundary.
    CompiledExpr cb(b);
    int sign = 0;
    for (const auto& p : pts) {
        double v;
        try {
            v = cb(p);
        } catch (const Error&) {
            return {false, "denominator is singular inside the region"};
        }
        if (std::fabs(v) < 1e-12)
            return {false, "denominator vanishes inside the region"};
        int s = v > 0 ? 1 : -1;
        if (sign != 0 && s != sign)
            return {false, "denominator changes sign inside the region"};
        sign = s;
    }
    return {};
}

SmoothVerdict smooth_rec(const Expr& e, const Box& box, int depth)
{
    if (e.is_piecewise()) {
        // restrict_to removed every cut not strictly inside the box.
        return {false, "piecewise definition straddles its cut"};
    }
    for (const auto& t : e.terms()) {
        for (const auto& f : t.factors) {
            const Interval& iv = f.var >= 0 ? box.at(static_cast<size_t>(f.var)) : box.front();
            switch (f.kind) {
            case AtomKind::Coord:
                if (sgn(f.exp) < 0 && straddles_zero(iv)) {
                    bool absorbed = false;
                    for (const auto& g : t.factors)
                        if (g.kind == AtomKind::Flat && g.var == f.var && sgn(g.exp) > 0)
                            absorbed = true;
                    if (!absorbed)
                        return {false, "pole on a coordinate hyperplane inside the region"};
                }
                break;
            case AtomKind::Flat:
                if (straddles_zero(iv) && sgn(f.exp) <= 0)
                    return {false, sgn(f.exp) == 0 ? "indicator jump inside the region"
                                                   : "flat factor with negative rate blows up"};
                break;
            case AtomKind::Exp: {
                Expr arg(f.arg);
                // Poles of the exponent are harmless only when a flat factor of
                // the same variable dominates them; treat them conservatively.
                auto v = smooth_rec(arg, box, depth + 1);
                if (!v.smooth) {
                    bool absorbed = false;
                    for (const auto& g : t.factors)
                        if (g.kind == AtomKind::Flat && sgn(g.exp) > 0 && max_pole_order(arg) <= 1)
                            absorbed = true;
                    if (!absorbed)
                        return {false, "exponent is not smooth: " + v.reason};
                }
                break;
            }
            case AtomKind::Base: {
                Expr b(f.arg);
                auto v = smooth_rec(b, box, depth + 1);
                if (!v.smooth)
                    return v;
                v = base_nonvanishing(b, box);
                if (!v.smooth)
                    return v;
                break;
            }
            }
        }
    }
    return {};
}

} // namespace

SmoothVerdict is_smooth_on(const Expr& e, const Box& box)
{
    return smooth_rec(restrict_to(e, box), box, 0);
}

} // namespace hlap
