#include "hlap/vectorcalc.hpp"

#include "hlap/error.hpp"

#include <algorithm>

namespace hlap {

namespace {

void require_same_chart(const Chart& a, const Chart& b)
{
    if (!(a.names == b.names))
        throw Error(ErrorKind::InvalidArgument, "operands live on different charts");
}

Expr apply_derivative(const Expr& u, const MultiIndex& alpha)
{
    Expr r = u;
    for (size_t i = 0; i < alpha.size(); ++i)
        for (int k = 0; k < alpha[i]; ++k) {
            if (r.is_zero())
                return r;
            r = differentiate(r, static_cast<int>(i));
        }
    return r;
}

long binomial(int n, int k)
{
    long r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

int total(const MultiIndex& a)
{
    int s = 0;
    for (int v : a)
        s += v;
    return s;
}

// All beta <= alpha componentwise.
std::vector<MultiIndex> sub_indices(const MultiIndex& alpha)
{
    std::vector<MultiIndex> out{MultiIndex(alpha.size(), 0)};
    for (size_t i = 0; i < alpha.size(); ++i) {
        std::vector<MultiIndex> next;
        for (const auto& b : out)
            for (int v = 0; v <= alpha[i]; ++v) {
                MultiIndex c = b;
                c[i] = v;
                next.push_back(c);
            }
        out = std::move(next);
    }
    return out;
}

} // namespace

VectorField::VectorField(Chart c, ExprVec v) : chart(std::move(c)), coeffs(std::move(v))
{
    if (static_cast<int>(coeffs.size()) != chart.dim())
        throw Error(ErrorKind::InvalidArgument, "vector field needs one coefficient per coordinate");
}

VectorField VectorField::zero(const Chart& c)
{
    return VectorField(c, ExprVec(static_cast<size_t>(c.dim())));
}

VectorField VectorField::partial(const Chart& c, int i)
{
    VectorField x = zero(c);
    x.coeffs.at(static_cast<size_t>(i)) = Expr(1);
    return x;
}

bool VectorField::is_zero() const
{
    return std::all_of(coeffs.begin(), coeffs.end(), [](const Expr& e) { return e.is_zero(); });
}

Density::Density(Chart c, Expr w) : chart(std::move(c)), weight(std::move(w))
{
    for (const auto& p : sample_points(chart.region, 32, 0xde75ULL)) {
        double v;
        try {
            v = evaluate(weight, p);
        } catch (const Error&) {
            throw Error(ErrorKind::InvalidArgument, "density weight is singular on the region");
        }
        if (!(v > 0.0))
            throw Error(ErrorKind::InvalidArgument, "density weight must be positive on the region");
    }
}

Density Density::lebesgue(const Chart& c)
{
    return Density(c, Expr(1));
}

bool Density::is_lebesgue() const
{
    auto c = weight.constant_value();
    return c && *c == 1;
}

DiffOperator DiffOperator::multiplication(const Chart& c, const Expr& f)
{
    DiffOperator p(c);
    p.add_term(MultiIndex(static_cast<size_t>(c.dim()), 0), f);
    return p;
}

DiffOperator DiffOperator::from_field(const VectorField& x)
{
    DiffOperator p(x.chart);
    for (int i = 0; i < x.dim(); ++i) {
        MultiIndex a(static_cast<size_t>(x.dim()), 0);
        a[static_cast<size_t>(i)] = 1;
        p.add_term(a, x.coeffs[static_cast<size_t>(i)]);
    }
    return p;
}

DiffOperator DiffOperator::derivative(const Chart& c, const MultiIndex& alpha, const Expr& coeff)
{
    DiffOperator p(c);
    p.add_term(alpha, coeff);
    return p;
}

int DiffOperator::order() const
{
    int o = -1;
    for (const auto& [a, c] : terms)
        o = std::max(o, total(a));
    return o;
}

Expr DiffOperator::coefficient(const MultiIndex& alpha) const
{
    auto it = terms.find(alpha);
    return it == terms.end() ? Expr() : it->second;
}

void DiffOperator::add_term(const MultiIndex& alpha, const Expr& c)
{
    if (static_cast<int>(alpha.size()) != chart.dim())
        throw Error(ErrorKind::InvalidArgument, "multi-index dimension mismatch");
    if (c.is_zero())
        return;
    auto it = terms.find(alpha);
    if (it == terms.end()) {
        terms.emplace(alpha, c);
        return;
    }
    it->second += c;
    if (it->second.is_zero())
        terms.erase(it);
}

Expr apply(const VectorField& x, const Expr& u)
{
    Expr r;
    for (int i = 0; i < x.dim(); ++i) {
        const Expr& c = x.coeffs[static_cast<size_t>(i)];
        if (!c.is_zero())
            r += c * differentiate(u, i);
    }
    return r;
}

Expr apply(const DiffOperator& p, const Expr& u)
{
    Expr r;
    for (const auto& [a, c] : p.terms)
        r += c * apply_derivative(u, a);
    return r;
}

VectorField operator+(const VectorField& a, const VectorField& b)
{
    require_same_chart(a.chart, b.chart);
    VectorField r = a;
    for (size_t i = 0; i < r.coeffs.size(); ++i)
        r.coeffs[i] += b.coeffs[i];
    return r;
}

VectorField operator-(const VectorField& a, const VectorField& b)
{
    require_same_chart(a.chart, b.chart);
    VectorField r = a;
    for (size_t i = 0; i < r.coeffs.size(); ++i)
        r.coeffs[i] -= b.coeffs[i];
    return r;
}

VectorField operator*(const Expr& f, const VectorField& a)
{
    VectorField r = a;
    for (auto& c : r.coeffs)
        c = f * c;
    return r;
}

bool identical(const VectorField& a, const VectorField& b)
{
    if (a.coeffs.size() != b.coeffs.size())
        return false;
    for (size_t i = 0; i < a.coeffs.size(); ++i)
        if (!identical(a.coeffs[i], b.coeffs[i]))
            return false;
    return true;
}

DiffOperator operator+(const DiffOperator& a, const DiffOperator& b)
{
    require_same_chart(a.chart, b.chart);
    DiffOperator r = a;
    for (const auto& [al, c] : b.terms)
        r.add_term(al, c);
    return r;
}

DiffOperator operator-(const DiffOperator& a)
{
    DiffOperator r(a.chart);
    for (const auto& [al, c] : a.terms)
        r.add_term(al, -c);
    return r;
}

DiffOperator operator-(const DiffOperator& a, const DiffOperator& b)
{
    return a + (-b);
}

DiffOperator operator*(const Expr& f, const DiffOperator& a)
{
    DiffOperator r(a.chart);
    for (const auto& [al, c] : a.terms)
        r.add_term(al, f * c);
    return r;
}

bool identical(const DiffOperator& a, const DiffOperator& b)
{
    if (a.terms.size() != b.terms.size())
        return false;
    for (auto ia = a.terms.begin(), ib = b.terms.begin(); ia != a.terms.end(); ++ia, ++ib)
        if (ia->first != ib->first || !identical(ia->second, ib->second))
            return false;
    return true;
}

VectorField lie_bracket(const VectorField& x, const VectorField& y)
{
    require_same_chart(x.chart, y.chart);
    VectorField r = VectorField::zero(x.chart);
    for (int i = 0; i < x.dim(); ++i)
        r.coeffs[static_cast<size_t>(i)] = apply(x, y.coeffs[static_cast<size_t>(i)]) - apply(y, x.coeffs[static_cast<size_t>(i)]);
    return r;
}

Expr divergence(const VectorField& x, const Density& mu)
{
    require_same_chart(x.chart, mu.chart);
    Expr s;
    if (mu.is_lebesgue()) {
        for (int i = 0; i < x.dim(); ++i)
            s += differentiate(x.coeffs[static_cast<size_t>(i)], i);
        return s;
    }
    for (int i = 0; i < x.dim(); ++i)
        s += differentiate(mu.weight * x.coeffs[static_cast<size_t>(i)], i);
    return s / mu.weight;
}

DiffOperator formal_adjoint(const VectorField& x, const Density& mu)
{
    DiffOperator p = -DiffOperator::from_field(x);
    p.add_term(MultiIndex(static_cast<size_t>(x.dim()), 0), -divergence(x, mu));
    return p;
}

DiffOperator formal_adjoint(const DiffOperator& p, const Density& mu)
{
    require_same_chart(p.chart, mu.chart);
    // u -> sum_alpha (-1)^|alpha| (1/m) d^alpha (m c_alpha u), expanded by Leibniz.
    DiffOperator r(p.chart);
    Expr inv_m = mu.is_lebesgue() ? Expr(1) : mu.weight.recip();
    for (const auto& [alpha, c] : p.terms) {
        Expr g = mu.is_lebesgue() ? c : mu.weight * c;
        int sign = total(alpha) % 2 == 0 ? 1 : -1;
        for (const auto& beta : sub_indices(alpha)) {
            long mult = 1;
            MultiIndex rest(alpha.size());
            for (size_t i = 0; i < alpha.size(); ++i) {
                mult *= binomial(alpha[i], beta[i]);
                rest[i] = alpha[i] - beta[i];
            }
            Expr d = apply_derivative(g, beta);
            if (d.is_zero())
                continue;
            r.add_term(rest, Expr(sign * mult) * inv_m * d);
        }
    }
    return r;
}

DiffOperator compose(const DiffOperator& p, const DiffOperator& q)
{
    require_same_chart(p.chart, q.chart);
    if (p.is_zero() || q.is_zero())
        return DiffOperator(p.chart);
    if (p.order() + q.order() > kMaxOperatorOrder)
        throw Error(ErrorKind::OrderOverflow, "composition exceeds order " + std::to_string(kMaxOperatorOrder));
    DiffOperator r(p.chart);
    // d^alpha (q_beta d^beta u) = sum_{gamma <= alpha} C(alpha, gamma) d^gamma q_beta d^(alpha - gamma + beta) u
    for (const auto& [alpha, pc] : p.terms) {
        auto gammas = sub_indices(alpha);
        for (const auto& [beta, qc] : q.terms) {
            for (const auto& gamma : gammas) {
                Expr d = apply_derivative(qc, gamma);
                if (d.is_zero())
                    continue;
                long mult = 1;
                MultiIndex idx(alpha.size());
                for (size_t i = 0; i < alpha.size(); ++i) {
                    mult *= binomial(alpha[i], gamma[i]);
                    idx[i] = alpha[i] - gamma[i] + beta[i];
                }
                r.add_term(idx, Expr(mult) * pc * d);
            }
        }
    }
    return r;
}

DiffOperator commutator(const DiffOperator& p, const DiffOperator& q)
{
    return compose(p, q) - compose(q, p);
}

DiffOperator restrict_to(const DiffOperator& p, const Box& box)
{
    DiffOperator r(p.chart);
    for (const auto& [a, c] : p.terms)
        r.add_term(a, restrict_to(c, box));
    return r;
}

std::string operator_key(const MultiIndex& alpha, const Chart& chart)
{
    std::string k;
    for (size_t i = 0; i < alpha.size(); ++i)
        for (int j = 0; j < alpha[i]; ++j)
            k += "d" + chart.names[i];
    return k.empty() ? "1" : k;
}

MultiIndex parse_operator_key(const std::string& key, const Chart& chart)
{
    MultiIndex a(static_cast<size_t>(chart.dim()), 0);
    if (key == "1")
        return a;
    size_t pos = 0;
    while (pos < key.size()) {
        if (key[pos] != 'd')
            throw Error(ErrorKind::ParseError, "operator key '" + key + "' must be a product of d<name>");
        ++pos;
        int best = -1;
        size_t best_len = 0;
        for (int i = 0; i < chart.dim(); ++i) {
            const auto& n = chart.names[static_cast<size_t>(i)];
            if (key.compare(pos, n.size(), n) == 0 && n.size() > best_len) {
                best = i;
                best_len = n.size();
            }
        }
        if (best < 0)
            throw Error(ErrorKind::ParseError, "operator key '" + key + "' names an unknown coordinate");
        a[static_cast<size_t>(best)] += 1;
        pos += best_len;
    }
    return a;
}

std::string to_string(const VectorField& x)
{
    std::string s = "[";
    for (size_t i = 0; i < x.coeffs.size(); ++i) {
        if (i)
            s += ", ";
        s += to_string(x.coeffs[i], x.chart);
    }
    return s + "]";
}

std::string to_string(const DiffOperator& p)
{
    if (p.is_zero())
        return "0";
    std::string s;
    // Highest order first for readability.
    std::vector<std::pair<MultiIndex, Expr>> items(p.terms.begin(), p.terms.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return total(a.first) > total(b.first); });
    for (const auto& [a, c] : items) {
        if (!s.empty())
            s += " + ";
        s += "(" + to_string(c, p.chart) + ")";
        if (total(a) > 0)
            s += "*" + operator_key(a, p.chart);
    }
    return s;
}

} // namespace hlap
