#include "expr_internal.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <map>
#include <set>

namespace hlap {

using detail::build_sum;
using detail::cmp_node;
using detail::Node;
using detail::NodePtr;

namespace detail {

namespace {

int sgn_cmp(const Rational& a, const Rational& b)
{
    int c = cmp(a, b);
    return (c > 0) - (c < 0);
}

bool factor_has_flat_or_pw(const Factor& f)
{
    if (f.kind == AtomKind::Flat)
        return true;
    return f.arg && f.arg->has_flat_or_pw;
}

NodePtr finish(Node n)
{
    if (n.pw) {
        n.has_flat_or_pw = true;
    } else {
        n.has_flat_or_pw = false;
        for (const auto& t : n.terms)
            for (const auto& f : t.factors)
                if (factor_has_flat_or_pw(f))
                    n.has_flat_or_pw = true;
    }
    return std::make_shared<const Node>(std::move(n));
}

} // namespace

const NodePtr& zero_node()
{
    static const NodePtr z = finish(Node{});
    return z;
}

int cmp_factor_key(const Factor& a, const Factor& b)
{
    if (a.kind != b.kind)
        return a.kind < b.kind ? -1 : 1;
    if (a.var != b.var)
        return a.var < b.var ? -1 : 1;
    if (a.arg || b.arg) {
        if (!a.arg)
            return -1;
        if (!b.arg)
            return 1;
        return cmp_node(a.arg.get(), b.arg.get());
    }
    return 0;
}

static int cmp_factor(const Factor& a, const Factor& b)
{
    int c = cmp_factor_key(a, b);
    if (c)
        return c;
    return sgn_cmp(a.exp, b.exp);
}

static int cmp_factors(const std::vector<Factor>& a, const std::vector<Factor>& b)
{
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i)
        if (int c = cmp_factor(a[i], b[i]))
            return c;
    if (a.size() != b.size())
        return a.size() < b.size() ? -1 : 1;
    return 0;
}

static int cmp_term(const Term& a, const Term& b)
{
    if (int c = cmp_factors(a.factors, b.factors))
        return c;
    return sgn_cmp(a.coeff, b.coeff);
}

int cmp_node(const Node* a, const Node* b)
{
    if (a == b)
        return 0;
    if (a->pw != b->pw)
        return a->pw ? 1 : -1;
    if (a->pw) {
        if (a->pw_var != b->pw_var)
            return a->pw_var < b->pw_var ? -1 : 1;
        if (int c = sgn_cmp(a->pw_cut, b->pw_cut))
            return c;
        if (int c = cmp_node(a->pw_then.get(), b->pw_then.get()))
            return c;
        return cmp_node(a->pw_else.get(), b->pw_else.get());
    }
    size_t n = std::min(a->terms.size(), b->terms.size());
    for (size_t i = 0; i < n; ++i)
        if (int c = cmp_term(a->terms[i], b->terms[i]))
            return c;
    if (a->terms.size() != b->terms.size())
        return a->terms.size() < b->terms.size() ? -1 : 1;
    return 0;
}

// Graded order: higher total coordinate degree first, then exponent vectors
// compared lexicographically (larger first), then the remaining atoms.
int mono_cmp(const std::vector<Factor>& a, const std::vector<Factor>& b)
{
    long da = 0, db = 0;
    size_t ca = 0, cb = 0;
    while (ca < a.size() && a[ca].kind == AtomKind::Coord)
        da += a[ca++].exp.get_num().get_si();
    while (cb < b.size() && b[cb].kind == AtomKind::Coord)
        db += b[cb++].exp.get_num().get_si();
    if (da != db)
        return da > db ? -1 : 1;
    size_t i = 0, j = 0;
    while (i < ca || j < cb) {
        int va = i < ca ? a[i].var : 1 << 30;
        int vb = j < cb ? b[j].var : 1 << 30;
        int v = std::min(va, vb);
        long ea = (va == v) ? a[i].exp.get_num().get_si() : 0;
        long eb = (vb == v) ? b[j].exp.get_num().get_si() : 0;
        if (ea != eb)
            return ea > eb ? -1 : 1;
        if (va == v)
            ++i;
        if (vb == v)
            ++j;
    }
    std::vector<Factor> ra(a.begin() + static_cast<long>(ca), a.end());
    std::vector<Factor> rb(b.begin() + static_cast<long>(cb), b.end());
    return cmp_factors(ra, rb);
}

NodePtr term_node(Term t)
{
    if (sgn(t.coeff) == 0)
        return zero_node();
    Node n;
    n.terms.push_back(std::move(t));
    return finish(std::move(n));
}

static NodePtr pw_node(int var, const Rational& cut, NodePtr t, NodePtr f)
{
    if (cmp_node(t.get(), f.get()) == 0)
        return t;
    Node n;
    n.pw = true;
    n.pw_var = var;
    n.pw_cut = cut;
    n.pw_then = std::move(t);
    n.pw_else = std::move(f);
    return finish(std::move(n));
}

} // namespace detail

namespace {

using detail::cmp_factor_key;
using detail::mono_cmp;
using detail::term_node;
using detail::zero_node;

// ---------------------------------------------------------------------------
// Polynomials in coordinates only, used for exact division.

struct GradedGreater {
    bool operator()(const std::vector<long>& a, const std::vector<long>& b) const
    {
        long da = 0, db = 0;
        for (long v : a)
            da += v;
        for (long v : b)
            db += v;
        if (da != db)
            return da > db;
        return a > b;
    }
};

using Poly = std::map<std::vector<long>, Rational, GradedGreater>;

int max_var(const std::vector<Term>& ts)
{
    int m = -1;
    for (const auto& t : ts)
        for (const auto& f : t.factors)
            if (f.kind == AtomKind::Coord || f.kind == AtomKind::Flat)
                m = std::max(m, f.var);
    return m;
}

bool coordinate_only(const std::vector<Term>& ts)
{
    for (const auto& t : ts)
        for (const auto& f : t.factors)
            if (f.kind != AtomKind::Coord)
                return false;
    return true;
}

std::optional<Poly> divide_exact(Poly r, const Poly& b)
{
    Poly q;
    const auto& lb = *b.begin();
    while (!r.empty()) {
        auto lr = *r.begin();
        std::vector<long> m(lr.first.size());
        for (size_t i = 0; i < m.size(); ++i) {
            m[i] = lr.first[i] - lb.first[i];
            if (m[i] < 0)
                return std::nullopt;
        }
        Rational c = lr.second / lb.second;
        q[m] += c;
        for (const auto& [bm, bc] : b) {
            std::vector<long> mm(m.size());
            for (size_t i = 0; i < m.size(); ++i)
                mm[i] = m[i] + bm[i];
            Rational& slot = r[mm];
            slot -= c * bc;
            if (sgn(slot) == 0)
                r.erase(mm);
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Term multiplication.

Factor make_factor(AtomKind k, int var, NodePtr arg, Rational e)
{
    Factor f;
    f.kind = k;
    f.var = var;
    f.arg = std::move(arg);
    f.exp = std::move(e);
    return f;
}

std::vector<Term> expand_power(const std::vector<Term>& base, long e);
std::vector<Term> mul_term_lists(const std::vector<Term>& a, const std::vector<Term>& b);

// Coefficient of the pure x_var^{-1} monomial in a sum without denominators.
Rational pure_inverse_coeff(const Node& a, int var)
{
    if (a.pw)
        return 0;
    for (const auto& t : a.terms) {
        for (const auto& f : t.factors)
            if (f.kind == AtomKind::Base)
                return 0;
        if (t.factors.size() == 1 && t.factors[0].kind == AtomKind::Coord && t.factors[0].var == var &&
            t.factors[0].exp == -1)
            return t.coeff;
    }
    return 0;
}

// Product of two monomials; returns one or more terms (more only when a
// denominator exponent turns positive and must be expanded).
std::vector<Term> mul_terms(const Term& a, const Term& b)
{
    Term r;
    r.coeff = a.coeff * b.coeff;
    if (sgn(r.coeff) == 0)
        return {};
    std::vector<Factor> out;
    std::vector<NodePtr> exps;
    std::vector<std::pair<NodePtr, long>> positive_bases;
    size_t i = 0, j = 0;
    auto push = [&](const Factor& f) {
        if (f.kind == AtomKind::Exp) {
            exps.push_back(f.arg);
            return;
        }
        out.push_back(f);
    };
    while (i < a.factors.size() || j < b.factors.size()) {
        int c;
        if (i >= a.factors.size())
            c = 1;
        else if (j >= b.factors.size())
            c = -1;
        else
            c = cmp_factor_key(a.factors[i], b.factors[j]);
        if (c < 0) {
            push(a.factors[i++]);
        } else if (c > 0) {
            push(b.factors[j++]);
        } else {
            const Factor& fa = a.factors[i++];
            const Factor& fb = b.factors[j++];
            if (fa.kind == AtomKind::Exp) {
                exps.push_back(fa.arg);
                exps.push_back(fb.arg);
                continue;
            }
            Rational e = fa.exp + fb.exp;
            if (fa.kind == AtomKind::Flat) {
                out.push_back(make_factor(fa.kind, fa.var, nullptr, e));
            } else if (sgn(e) != 0) {
                if (fa.kind == AtomKind::Base && sgn(e) > 0)
                    positive_bases.emplace_back(fa.arg, e.get_num().get_si());
                else
                    out.push_back(make_factor(fa.kind, fa.var, fa.arg, e));
            }
        }
    }
    if (!exps.empty()) {
        Expr arg;
        for (const auto& n : exps)
            arg = arg + Expr(n);
        for (auto& f : out) {
            if (f.kind != AtomKind::Flat)
                continue;
            Rational q = pure_inverse_coeff(*arg.node(), f.var);
            if (sgn(q) != 0) {
                f.exp -= q;
                arg = arg - Expr(q) * Expr::coord(f.var).pow(-1);
            }
        }
        if (!arg.is_zero()) {
            if (arg.is_piecewise())
                throw Error(ErrorKind::Unsupported, "piecewise inside exp must be lifted first");
            out.push_back(make_factor(AtomKind::Exp, -1, arg.node(), 1));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Factor& x, const Factor& y) { return cmp_factor_key(x, y) < 0; });
    r.factors = std::move(out);
    if (positive_bases.empty())
        return {r};
    std::vector<Term> acc{r};
    for (const auto& [node, e] : positive_bases)
        acc = mul_term_lists(acc, expand_power(node->terms, e));
    return acc;
}

std::vector<Term> mul_term_lists(const std::vector<Term>& a, const std::vector<Term>& b)
{
    std::vector<Term> out;
    out.reserve(a.size() * b.size());
    for (const auto& x : a)
        for (const auto& y : b)
            for (auto& t : mul_terms(x, y))
                out.push_back(std::move(t));
    return out;
}

std::vector<Term> collect(std::vector<Term> ts)
{
    std::sort(ts.begin(), ts.end(), [](const Term& x, const Term& y) { return mono_cmp(x.factors, y.factors) < 0; });
    std::vector<Term> out;
    for (auto& t : ts) {
        if (!out.empty() && mono_cmp(out.back().factors, t.factors) == 0) {
            out.back().coeff += t.coeff;
        } else {
            if (!out.empty() && sgn(out.back().coeff) == 0)
                out.pop_back();
            out.push_back(std::move(t));
        }
    }
    if (!out.empty() && sgn(out.back().coeff) == 0)
        out.pop_back();
    return out;
}

std::vector<Term> expand_power(const std::vector<Term>& base, long e)
{
    Term one;
    one.coeff = 1;
    std::vector<Term> acc{one};
    std::vector<Term> sq = base;
    while (e > 0) {
        if (e & 1)
            acc = collect(mul_term_lists(acc, sq));
        e >>= 1;
        if (e)
            sq = collect(mul_term_lists(sq, sq));
    }
    return acc;
}

std::vector<Factor> base_part(const Term& t)
{
    std::vector<Factor> r;
    for (const auto& f : t.factors)
        if (f.kind == AtomKind::Base)
            r.push_back(f);
    return r;
}

Term strip_bases(const Term& t)
{
    Term r;
    r.coeff = t.coeff;
    for (const auto& f : t.factors)
        if (f.kind != AtomKind::Base)
            r.factors.push_back(f);
    return r;
}

// Attempts N / b exactly, where b is a coordinate-only polynomial. Terms of N
// are grouped by their non-coordinate atoms; each group must be divisible.
std::optional<std::vector<Term>> divide_terms(const std::vector<Term>& num, const Node& b)
{
    if (!coordinate_only(b.terms))
        return std::nullopt;
    int dim = std::max(max_var(num), max_var(b.terms)) + 1;
    if (dim <= 0)
        return std::nullopt;
    auto to_vec = [&](const Term& t) {
        std::vector<long> v(static_cast<size_t>(dim), 0);
        for (const auto& f : t.factors)
            if (f.kind == AtomKind::Coord)
                v[static_cast<size_t>(f.var)] = f.exp.get_num().get_si();
        return v;
    };
    Poly pb;
    for (const auto& t : b.terms)
        pb[to_vec(t)] = t.coeff;

    std::vector<std::pair<std::vector<Factor>, std::vector<const Term*>>> groups;
    for (const auto& t : num) {
        std::vector<Factor> rest;
        for (const auto& f : t.factors)
            if (f.kind != AtomKind::Coord)
                rest.push_back(f);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            if (g.first.size() != rest.size())
                return false;
            for (size_t k = 0; k < rest.size(); ++k)
                if (cmp_factor_key(g.first[k], rest[k]) != 0 || g.first[k].exp != rest[k].exp)
                    return false;
            return true;
        });
        if (it == groups.end())
            groups.push_back({rest, {&t}});
        else
            it->second.push_back(&t);
    }
    std::vector<Term> out;
    for (const auto& [rest, members] : groups) {
        std::vector<long> shift(static_cast<size_t>(dim), 0);
        for (const Term* t : members) {
            auto v = to_vec(*t);
            for (int k = 0; k < dim; ++k)
                shift[k] = std::min(shift[k], v[k]);
        }
        Poly p;
        for (const Term* t : members) {
            auto v = to_vec(*t);
            for (int k = 0; k < dim; ++k)
                v[k] -= shift[k];
            p[v] += t->coeff;
        }
        auto q = divide_exact(std::move(p), pb);
        if (!q)
            return std::nullopt;
        for (const auto& [m, c] : *q) {
            Term t;
            t.coeff = c;
            for (int k = 0; k < dim; ++k) {
                long e = m[k] + shift[k];
                if (e != 0)
                    t.factors.push_back(make_factor(AtomKind::Coord, k, nullptr, Rational(e)));
            }
            for (const auto& f : rest)
                t.factors.push_back(f);
            std::sort(t.factors.begin(), t.factors.end(),
                      [](const Factor& x, const Factor& y) { return cmp_factor_key(x, y) < 0; });
            out.push_back(std::move(t));
        }
    }
    return out;
}

} // namespace

namespace detail {

NodePtr build_sum(std::vector<Term> ts)
{
    ts = collect(std::move(ts));
    if (ts.empty())
        return zero_node();

    // Least common denominator over Base factors.
    std::vector<Factor> lcd;
    for (const auto& t : ts) {
        for (const auto& f : t.factors) {
            if (f.kind != AtomKind::Base)
                continue;
            auto it = std::find_if(lcd.begin(), lcd.end(), [&](const Factor& g) { return cmp_factor_key(g, f) == 0; });
            if (it == lcd.end())
                lcd.push_back(f);
            else if (f.exp < it->exp)
                it->exp = f.exp;
        }
    }
    std::sort(lcd.begin(), lcd.end(), [](const Factor& x, const Factor& y) { return cmp_factor_key(x, y) < 0; });

    bool uniform = true;
    for (const auto& t : ts) {
        auto bp = base_part(t);
        if (bp.size() != lcd.size()) {
            uniform = false;
            break;
        }
        for (size_t k = 0; k < bp.size(); ++k)
            if (cmp_factor_key(bp[k], lcd[k]) != 0 || bp[k].exp != lcd[k].exp)
                uniform = false;
        if (!uniform)
            break;
    }

    std::vector<Term> num;
    num.reserve(ts.size());
    if (uniform) {
        for (const auto& t : ts)
            num.push_back(strip_bases(t));
    } else {
        for (const auto& t : ts) {
            std::vector<Term> acc{strip_bases(t)};
            auto bp = base_part(t);
            for (const auto& l : lcd) {
                Rational have = 0;
                for (const auto& f : bp)
                    if (cmp_factor_key(f, l) == 0)
                        have = f.exp;
                long missing = Rational(have - l.exp).get_num().get_si();
                if (missing > 0)
                    acc = mul_term_lists(acc, expand_power(l.arg->terms, missing));
            }
            for (auto& x : acc)
                num.push_back(std::move(x));
        }
        num = collect(std::move(num));
        if (num.empty())
            return zero_node();
    }

    // Cancel denominators that divide the numerator exactly.
    for (auto& l : lcd) {
        while (sgn(l.exp) < 0) {
            auto q = divide_terms(num, *l.arg);
            if (!q)
                break;
            num = std::move(*q);
            l.exp += 1;
        }
    }
    std::vector<Term> out;
    out.reserve(num.size());
    for (auto& t : num) {
        for (const auto& l : lcd)
            if (sgn(l.exp) != 0)
                t.factors.push_back(l);
        out.push_back(std::move(t));
    }
    out = collect(std::move(out));
    if (out.empty())
        return zero_node();
    Node n;
    n.terms = std::move(out);
    return finish(std::move(n));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Expr API

Expr::Expr() : n_(zero_node()) {}

Expr::Expr(long v) : Expr(Rational(v)) {}

Expr::Expr(const Rational& q)
{
    Term t;
    t.coeff = q;
    t.coeff.canonicalize();
    n_ = term_node(std::move(t));
}

Expr Expr::coord(int i)
{
    Term t;
    t.coeff = 1;
    t.factors.push_back(make_factor(AtomKind::Coord, i, nullptr, 1));
    return Expr(term_node(std::move(t)));
}

Expr Expr::flatplus(int i)
{
    Term t;
    t.coeff = 1;
    t.factors.push_back(make_factor(AtomKind::Flat, i, nullptr, 1));
    return Expr(term_node(std::move(t)));
}

bool Expr::is_zero() const
{
    return !n_->pw && n_->terms.empty();
}

std::optional<Rational> Expr::constant_value() const
{
    if (n_->pw)
        return std::nullopt;
    if (n_->terms.empty())
        return Rational(0);
    if (n_->terms.size() == 1 && n_->terms[0].factors.empty())
        return n_->terms[0].coeff;
    return std::nullopt;
}

bool Expr::is_piecewise() const { return n_->pw; }
int Expr::pw_var() const { return n_->pw_var; }
const Rational& Expr::pw_cut() const { return n_->pw_cut; }
Expr Expr::pw_then() const { return Expr(n_->pw_then); }
Expr Expr::pw_else() const { return Expr(n_->pw_else); }
const std::vector<Term>& Expr::terms() const { return n_->terms; }

int compare(const Expr& a, const Expr& b)
{
    return cmp_node(a.node().get(), b.node().get());
}

bool identical(const Expr& a, const Expr& b)
{
    return compare(a, b) == 0;
}

Expr piecewise(int var, const Rational& cut, const Expr& then_branch, const Expr& else_branch)
{
    return Expr(detail::pw_node(var, cut, then_branch.node(), else_branch.node()));
}

namespace {

// Lifts a binary operation over piecewise operands (ordered decision tree).
template <typename Op>
Expr lift2(const Expr& a, const Expr& b, Op op)
{
    if (!a.is_piecewise() && !b.is_piecewise())
        return op(a, b);
    int var;
    Rational cut;
    auto key_less = [](int v1, const Rational& c1, int v2, const Rational& c2) {
        return v1 != v2 ? v1 < v2 : c1 < c2;
    };
    if (a.is_piecewise() && (!b.is_piecewise() || !key_less(b.pw_var(), b.pw_cut(), a.pw_var(), a.pw_cut()))) {
        var = a.pw_var();
        cut = a.pw_cut();
    } else {
        var = b.pw_var();
        cut = b.pw_cut();
    }
    auto split = [&](const Expr& e) -> std::pair<Expr, Expr> {
        if (e.is_piecewise() && e.pw_var() == var && e.pw_cut() == cut)
            return {e.pw_then(), e.pw_else()};
        return {e, e};
    };
    auto [at, af] = split(a);
    auto [bt, bf] = split(b);
    return piecewise(var, cut, lift2(at, bt, op), lift2(af, bf, op));
}

template <typename Op>
Expr lift1(const Expr& a, Op op)
{
    if (!a.is_piecewise())
        return op(a);
    return piecewise(a.pw_var(), a.pw_cut(), lift1(a.pw_then(), op), lift1(a.pw_else(), op));
}

Expr add_plain(const Expr& a, const Expr& b)
{
    if (a.is_zero())
        return b;
    if (b.is_zero())
        return a;
    std::vector<Term> ts = a.terms();
    ts.insert(ts.end(), b.terms().begin(), b.terms().end());
    return Expr(build_sum(std::move(ts)));
}

Expr mul_plain(const Expr& a, const Expr& b)
{
    if (a.is_zero() || b.is_zero())
        return Expr();
    if (auto c = a.constant_value(); c && *c == 1)
        return b;
    if (auto c = b.constant_value(); c && *c == 1)
        return a;
    return Expr(build_sum(mul_term_lists(a.terms(), b.terms())));
}

Expr from_factor(const Factor& f)
{
    Term t;
    t.coeff = 1;
    t.factors.push_back(f);
    return Expr(term_node(std::move(t)));
}

// Inverse of a single monomial.
Expr invert_term(const Term& t)
{
    Term m;
    m.coeff = 1 / t.coeff;
    std::vector<Term> expanded;
    Expr e_arg;
    bool has_exp = false;
    for (const auto& f : t.factors) {
        switch (f.kind) {
        case AtomKind::Coord:
        case AtomKind::Flat:
            m.factors.push_back(make_factor(f.kind, f.var, nullptr, -f.exp));
            break;
        case AtomKind::Exp:
            has_exp = true;
            e_arg = -Expr(f.arg);
            break;
        case AtomKind::Base:
            break;
        }
    }
    Expr r(term_node(std::move(m)));
    if (has_exp)
        r = r * exp(e_arg);
    for (const auto& f : t.factors)
        if (f.kind == AtomKind::Base)
            r = r * Expr(build_sum(expand_power(f.arg->terms, Rational(-f.exp).get_num().get_si())));
    return r;
}

Expr recip_plain(const Expr& a)
{
    if (a.is_zero())
        throw Error(ErrorKind::SingularPoint, "reciprocal of zero");
    const auto& ts = a.terms();
    if (ts.size() == 1)
        return invert_term(ts[0]);

    // a = N * L with L the shared denominator part.
    std::vector<Factor> lcd = base_part(ts[0]);
    std::vector<Term> num;
    for (const auto& t : ts)
        num.push_back(strip_bases(t));

    // Common monomial content of N.
    std::map<int, Rational> coord_min;
    std::map<int, Rational> flat_min;
    {
        std::map<int, int> flat_count;
        for (size_t k = 0; k < num.size(); ++k) {
            std::map<int, Rational> here;
            for (const auto& f : num[k].factors)
                if (f.kind == AtomKind::Coord)
                    here[f.var] = f.exp;
            if (k == 0) {
                coord_min = here;
            } else {
                std::map<int, Rational> merged;
                std::set<int> vars;
                for (auto& [v, e] : coord_min)
                    vars.insert(v);
                for (auto& [v, e] : here)
                    vars.insert(v);
                for (int v : vars) {
                    Rational x = coord_min.count(v) ? coord_min[v] : Rational(0);
                    Rational y = here.count(v) ? here[v] : Rational(0);
                    Rational m = x < y ? x : y;
                    if (sgn(m) != 0)
                        merged[v] = m;
                }
                coord_min = merged;
            }
            for (const auto& f : num[k].factors) {
                if (f.kind != AtomKind::Flat)
                    continue;
                flat_count[f.var]++;
                if (!flat_min.count(f.var) || f.exp < flat_min[f.var])
                    flat_min[f.var] = f.exp;
            }
        }
        for (auto it = flat_min.begin(); it != flat_min.end();) {
            if (flat_count[it->first] != static_cast<int>(num.size()))
                it = flat_min.erase(it);
            else
                ++it;
        }
    }
    NodePtr common_exp;
    {
        bool all = true;
        for (const auto& t : num) {
            const Factor* e = nullptr;
            for (const auto& f : t.factors)
                if (f.kind == AtomKind::Exp)
                    e = &f;
            if (!e) {
                all = false;
                break;
            }
            if (!common_exp)
                common_exp = e->arg;
            else if (cmp_node(common_exp.get(), e->arg.get()) != 0) {
                all = false;
                break;
            }
        }
        if (!all)
            common_exp = nullptr;
    }

    Term content;
    content.coeff = 1;
    for (auto& [v, e] : coord_min)
        content.factors.push_back(make_factor(AtomKind::Coord, v, nullptr, e));
    for (auto& [v, e] : flat_min)
        content.factors.push_back(make_factor(AtomKind::Flat, v, nullptr, e));
    if (common_exp)
        content.factors.push_back(make_factor(AtomKind::Exp, -1, common_exp, 1));
    std::sort(content.factors.begin(), content.factors.end(),
              [](const Factor& x, const Factor& y) { return cmp_factor_key(x, y) < 0; });

    Expr inv_content = invert_term(content);
    std::vector<Term> nhat;
    for (const auto& t : num)
        for (auto& x : mul_term_lists({t}, inv_content.terms()))
            nhat.push_back(std::move(x));
    NodePtr nh = build_sum(std::move(nhat));
    Rational lead = nh->terms.front().coeff;
    Expr base_expr = Expr(nh) * Expr(Rational(1) / lead);
    Expr result;
    if (base_expr.terms().size() == 1) {
        result = invert_term(base_expr.terms()[0]);
    } else {
        result = from_factor(make_factor(AtomKind::Base, -1, base_expr.node(), -1));
    }
    result = result * inv_content * Expr(Rational(1) / lead);
    for (const auto& l : lcd)
        result = result * Expr(build_sum(expand_power(l.arg->terms, Rational(-l.exp).get_num().get_si())));
    return result;
}

} // namespace

Expr operator+(const Expr& a, const Expr& b)
{
    return lift2(a, b, add_plain);
}

Expr operator-(const Expr& a)
{
    return lift1(a, [](const Expr& x) {
        std::vector<Term> ts = x.terms();
        for (auto& t : ts)
            t.coeff = -t.coeff;
        Node n;
        n.terms = std::move(ts);
        return Expr(detail::build_sum(std::move(n.terms)));
    });
}

Expr operator-(const Expr& a, const Expr& b)
{
    return a + (-b);
}

Expr operator*(const Expr& a, const Expr& b)
{
    return lift2(a, b, mul_plain);
}

Expr operator/(const Expr& a, const Expr& b)
{
    return a * b.recip();
}

Expr Expr::recip() const
{
    return lift1(*this, recip_plain);
}

Expr Expr::pow(long n) const
{
    if (n < 0)
        return recip().pow(-n);
    Expr acc(1L);
    Expr sq = *this;
    while (n > 0) {
        if (n & 1)
            acc = acc * sq;
        n >>= 1;
        if (n)
            sq = sq * sq;
    }
    return acc;
}

Expr Expr::pow_rational(const Rational& q) const
{
    return lift1(*this, [&](const Expr& x) {
        if (x.is_zero())
            return x;
        bool monomial = x.terms().size() == 1 && x.terms()[0].coeff == 1;
        if (!monomial && q.get_den() == 1)
            return x.pow(q.get_num().get_si());
        if (!monomial)
            throw Error(ErrorKind::Unsupported, "fractional power of a non-monomial");
        const Term& t = x.terms()[0];
        Expr r(1L);
        for (const auto& f : t.factors) {
            Rational e = f.exp * q;
            switch (f.kind) {
            case AtomKind::Flat:
                r = r * from_factor(make_factor(AtomKind::Flat, f.var, nullptr, e));
                break;
            case AtomKind::Exp:
                r = r * exp(Expr(f.arg) * Expr(q));
                break;
            case AtomKind::Coord:
            case AtomKind::Base:
                if (e.get_den() != 1)
                    throw Error(ErrorKind::Unsupported, "fractional power of a coordinate");
                if (f.kind == AtomKind::Coord)
                    r = r * Expr::coord(f.var).pow(e.get_num().get_si());
                else
                    r = r * Expr(f.arg).pow(e.get_num().get_si());
                break;
            }
        }
        return r;
    });
}

Expr exp(const Expr& a)
{
    return lift1(a, [](const Expr& x) {
        if (x.is_zero())
            return Expr(1L);
        return from_factor(make_factor(AtomKind::Exp, -1, x.node(), 1));
    });
}

// ---------------------------------------------------------------------------
// Differentiation

namespace {

Expr term_expr(const Term& t)
{
    return Expr(term_node(t));
}

Term with_factor_exp(const Term& t, size_t idx, const Rational& e)
{
    Term r;
    r.coeff = t.coeff;
    for (size_t k = 0; k < t.factors.size(); ++k) {
        if (k == idx) {
            if (sgn(e) != 0 || t.factors[k].kind == AtomKind::Flat) {
                Factor f = t.factors[k];
                f.exp = e;
                r.factors.push_back(f);
            }
        } else {
            r.factors.push_back(t.factors[k]);
        }
    }
    return r;
}

} // namespace

Expr differentiate(const Expr& e, int i)
{
    if (e.is_piecewise())
        return piecewise(e.pw_var(), e.pw_cut(), differentiate(e.pw_then(), i), differentiate(e.pw_else(), i));
    std::vector<Term> out;
    auto append = [&](const Expr& x) {
        if (x.is_piecewise())
            throw Error(ErrorKind::Unsupported, "piecewise inside monomial");
        out.insert(out.end(), x.terms().begin(), x.terms().end());
    };
    for (const auto& t : e.terms()) {
        for (size_t k = 0; k < t.factors.size(); ++k) {
            const Factor& f = t.factors[k];
            switch (f.kind) {
            case AtomKind::Coord:
                if (f.var == i) {
                    Term d = with_factor_exp(t, k, f.exp - 1);
                    d.coeff *= f.exp;
                    append(term_expr(d));
                }
                break;
            case AtomKind::Flat:
                if (f.var == i && sgn(f.exp) != 0) {
                    Term d = t;
                    d.coeff *= f.exp;
                    append(term_expr(d) * Expr::coord(i).pow(-2));
                }
                break;
            case AtomKind::Exp: {
                Expr da = differentiate(Expr(f.arg), i);
                if (!da.is_zero())
                    append(term_expr(t) * da);
                break;
            }
            case AtomKind::Base: {
                Expr db = differentiate(Expr(f.arg), i);
                if (!db.is_zero()) {
                    Term d = with_factor_exp(t, k, f.exp - 1);
                    d.coeff *= f.exp;
                    append(term_expr(d) * db);
                }
                break;
            }
            }
        }
    }
    return Expr(build_sum(std::move(out)));
}

// ---------------------------------------------------------------------------
// Rebuilding: substitution and restriction

namespace {

template <typename AtomFn>
Expr rebuild_sum(const Expr& e, AtomFn atom)
{
    Expr acc;
    for (const auto& t : e.terms()) {
        Expr prod(t.coeff);
        for (const auto& f : t.factors) {
            Expr v = atom(f);
            prod = prod * v;
            if (prod.is_zero())
                break;
        }
        acc = acc + prod;
    }
    return acc;
}

} // namespace

Expr substitute(const Expr& e, const std::vector<Expr>& images)
{
    if (e.is_piecewise()) {
        int v = e.pw_var();
        if (v >= static_cast<int>(images.size()))
            throw Error(ErrorKind::InvalidArgument, "substitution image missing");
        const Expr& img = images[static_cast<size_t>(v)];
        Expr st = substitute(e.pw_then(), images);
        Expr se = substitute(e.pw_else(), images);
        if (auto c = img.constant_value())
            return (*c > e.pw_cut()) ? st : se;
        // Affine image a*x_k + d.
        int k = -1;
        Rational a = 0, d = 0;
        for (const auto& t : img.terms()) {
            if (t.factors.empty()) {
                d = t.coeff;
            } else if (t.factors.size() == 1 && t.factors[0].kind == AtomKind::Coord && t.factors[0].exp == 1 && k < 0) {
                k = t.factors[0].var;
                a = t.coeff;
            } else {
                throw Error(ErrorKind::Unsupported, "piecewise condition under non-affine substitution");
            }
        }
        Rational cut = (e.pw_cut() - d) / a;
        if (sgn(a) > 0)
            return piecewise(k, cut, st, se);
        return piecewise(k, cut, se, st);
    }
    return rebuild_sum(e, [&](const Factor& f) -> Expr {
        switch (f.kind) {
        case AtomKind::Coord:
            return images.at(static_cast<size_t>(f.var)).pow(f.exp.get_num().get_si());
        case AtomKind::Flat: {
            const Expr& img = images.at(static_cast<size_t>(f.var));
            const auto& ts = img.terms();
            if (img.is_piecewise() || ts.size() != 1 || ts[0].factors.size() != 1 ||
                ts[0].factors[0].kind != AtomKind::Coord || ts[0].factors[0].exp != 1 || sgn(ts[0].coeff) <= 0)
                throw Error(ErrorKind::Unsupported, "flatplus under a non-scaling substitution");
            Rational rate = f.exp / ts[0].coeff;
            Term t;
            t.coeff = 1;
            t.factors.push_back(make_factor(AtomKind::Flat, ts[0].factors[0].var, nullptr, rate));
            return Expr(term_node(std::move(t)));
        }
        case AtomKind::Exp:
            return exp(substitute(Expr(f.arg), images));
        case AtomKind::Base:
            return substitute(Expr(f.arg), images).pow(f.exp.get_num().get_si());
        }
        return Expr();
    });
}

Expr restrict_to(const Expr& e, const Box& box)
{
    if (!e.node()->has_flat_or_pw)
        return e;
    if (e.is_piecewise()) {
        const Interval& iv = box.at(static_cast<size_t>(e.pw_var()));
        double cut = e.pw_cut().get_d();
        if (iv.lo >= cut)
            return restrict_to(e.pw_then(), box);
        if (iv.hi <= cut)
            return restrict_to(e.pw_else(), box);
        return piecewise(e.pw_var(), e.pw_cut(), restrict_to(e.pw_then(), box), restrict_to(e.pw_else(), box));
    }
    return rebuild_sum(e, [&](const Factor& f) -> Expr {
        switch (f.kind) {
        case AtomKind::Coord:
            return Expr::coord(f.var).pow(f.exp.get_num().get_si());
        case AtomKind::Flat: {
            const Interval& iv = box.at(static_cast<size_t>(f.var));
            if (iv.hi <= 0)
                return Expr();
            if (iv.lo >= 0)
                return exp(-Expr(f.exp) * Expr::coord(f.var).pow(-1));
            return from_factor(f);
        }
        case AtomKind::Exp:
            return exp(restrict_to(Expr(f.arg), box));
        case AtomKind::Base:
            return restrict_to(Expr(f.arg), box).pow(f.exp.get_num().get_si());
        }
        return Expr();
    });
}

// ---------------------------------------------------------------------------
// Structural queries

int max_pole_order(const Expr& e)
{
    if (e.is_piecewise())
        return std::max(max_pole_order(e.pw_then()), max_pole_order(e.pw_else()));
    int m = 0;
    for (const auto& t : e.terms()) {
        for (const auto& f : t.factors) {
            if ((f.kind == AtomKind::Coord || f.kind == AtomKind::Base) && sgn(f.exp) < 0)
                m = std::max(m, static_cast<int>(-f.exp.get_num().get_si()));
            if (f.kind == AtomKind::Exp)
                m = std::max(m, max_pole_order(Expr(f.arg)));
        }
    }
    return m;
}

bool is_polynomial(const Expr& e)
{
    if (e.is_piecewise())
        return false;
    for (const auto& t : e.terms())
        for (const auto& f : t.factors)
            if (f.kind != AtomKind::Coord || sgn(f.exp) < 0)
                return false;
    return true;
}

int total_degree(const Expr& e)
{
    if (e.is_zero())
        return -1;
    int d = 0;
    for (const auto& t : e.terms()) {
        int s = 0;
        for (const auto& f : t.factors)
            if (f.kind == AtomKind::Coord)
                s += static_cast<int>(f.exp.get_num().get_si());
        d = std::max(d, s);
    }
    return d;
}

std::vector<std::vector<double>> breakpoints(const Expr& e, int dim)
{
    std::vector<std::set<double>> acc(static_cast<size_t>(dim));
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
        if (x.is_piecewise()) {
            acc.at(static_cast<size_t>(x.pw_var())).insert(x.pw_cut().get_d());
            walk(x.pw_then());
            walk(x.pw_else());
            return;
        }
        for (const auto& t : x.terms()) {
            for (const auto& f : t.factors) {
                if (f.kind == AtomKind::Flat || (f.kind == AtomKind::Coord && sgn(f.exp) < 0))
                    acc.at(static_cast<size_t>(f.var)).insert(0.0);
                if (f.arg)
                    walk(Expr(f.arg));
            }
        }
    };
    walk(e);
    std::vector<std::vector<double>> out;
    for (auto& s : acc)
        out.emplace_back(s.begin(), s.end());
    return out;
}

} // namespace hlap
