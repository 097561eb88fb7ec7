#include "hlap/foliated_forms.hpp"

#include "hlap/error.hpp"
#include "hlap/quadrature.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace hlap {

namespace {

// Sorts idx in place and returns the permutation sign, or 0 on a repeat.
int sort_sign(std::vector<int>& idx)
{
    int sign = 1;
    for (size_t i = 1; i < idx.size(); ++i)
        for (size_t j = i; j > 0 && idx[j - 1] > idx[j]; --j) {
            std::swap(idx[j - 1], idx[j]);
            sign = -sign;
        }
    for (size_t i = 1; i < idx.size(); ++i)
        if (idx[i] == idx[i - 1])
            return 0;
    return sign;
}

std::map<IndexSet, size_t> position_map(int r, int k)
{
    std::map<IndexSet, size_t> m;
    auto subsets = k_subsets(r, k);
    for (size_t i = 0; i < subsets.size(); ++i)
        m.emplace(subsets[i], i);
    return m;
}

IndexSet without(const IndexSet& s, size_t a)
{
    IndexSet r;
    for (size_t i = 0; i < s.size(); ++i)
        if (i != a)
            r.push_back(s[i]);
    return r;
}

IndexSet without(const IndexSet& s, size_t a, size_t b)
{
    IndexSet r;
    for (size_t i = 0; i < s.size(); ++i)
        if (i != a && i != b)
            r.push_back(s[i]);
    return r;
}

Expr parity(size_t n)
{
    return n % 2 == 0 ? Expr(1) : Expr(-1);
}

// Leibniz expansion; the minors involved are at most rank x rank.
Expr minor_det(const ExprMat& m, const IndexSet& rows, const IndexSet& cols)
{
    const size_t k = rows.size();
    if (k == 0)
        return Expr(1);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    Expr det;
    do {
        std::vector<int> p = perm;
        int sign = sort_sign(p);
        Expr term(sign);
        for (size_t i = 0; i < k && !term.is_zero(); ++i)
            term *= m[static_cast<size_t>(rows[i])][static_cast<size_t>(cols[static_cast<size_t>(perm[i])])];
        det += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return det;
}

FormOperator zero_operator(const Chart& c, int rank, int from, int to)
{
    FormOperator op;
    op.chart = c;
    op.rank = rank;
    op.from_degree = from;
    op.to_degree = to;
    op.entries.assign(k_subsets(rank, to).size(),
                      std::vector<DiffOperator>(k_subsets(rank, from).size(), DiffOperator(c)));
    return op;
}

bool is_identity(const ExprMat& m)
{
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < m.size(); ++j)
            if (!identical(m[i][j], Expr(i == j ? 1 : 0)))
                return false;
    return true;
}

FormOperator adjoint_entries(const FormOperator& d, const Density& mu)
{
    FormOperator t = zero_operator(d.chart, d.rank, d.to_degree, d.from_degree);
    for (size_t i = 0; i < d.entries.size(); ++i)
        for (size_t j = 0; j < d.entries[i].size(); ++j)
            if (!d.entries[i][j].is_zero())
                t.entries[j][i] = formal_adjoint(d.entries[i][j], mu);
    return t;
}

// Left multiplication of every operator column by a scalar matrix.
FormOperator left_multiply(const ExprMat& h, const FormOperator& a)
{
    FormOperator r = zero_operator(a.chart, a.rank, a.from_degree, a.to_degree);
    for (size_t i = 0; i < h.size(); ++i)
        for (size_t l = 0; l < h.size(); ++l) {
            if (h[i][l].is_zero())
                continue;
            for (size_t j = 0; j < a.entries[l].size(); ++j)
                if (!a.entries[l][j].is_zero())
                    r.entries[i][j] = r.entries[i][j] + h[i][l] * a.entries[l][j];
        }
    return r;
}

FormOperator right_multiply(const FormOperator& a, const ExprMat& h)
{
    FormOperator r = zero_operator(a.chart, a.rank, a.from_degree, a.to_degree);
    for (size_t i = 0; i < a.entries.size(); ++i)
        for (size_t l = 0; l < h.size(); ++l) {
            if (a.entries[i][l].is_zero())
                continue;
            for (size_t j = 0; j < h.size(); ++j)
                if (!h[l][j].is_zero())
                    r.entries[i][j] =
                        r.entries[i][j] + compose(a.entries[i][l], DiffOperator::multiplication(a.chart, h[l][j]));
        }
    return r;
}

std::vector<Expr> corpus(const Chart& c)
{
    const int n = c.dim();
    Expr x = Expr::coord(0), z = Expr::coord(n - 1);
    return {Expr(1), x, x * z + z.pow(2), exp(z)};
}

int max_pointwise_rank(const LocalPresentation& p)
{
    ExprMat a = p.anchor_matrix();
    int best = 0;
    for (const auto& pt : grid_points(p.base_region, 5))
        best = std::max(best, numeric_rank(evaluate_matrix(a, pt)));
    return best;
}

} // namespace

std::vector<IndexSet> k_subsets(int r, int k)
{
    std::vector<IndexSet> out;
    if (k < 0 || k > r)
        return out;
    IndexSet s(static_cast<size_t>(k));
    std::iota(s.begin(), s.end(), 0);
    while (true) {
        out.push_back(s);
        int i = k - 1;
        while (i >= 0 && s[static_cast<size_t>(i)] == r - k + i)
            --i;
        if (i < 0)
            break;
        ++s[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            s[static_cast<size_t>(j)] = s[static_cast<size_t>(j - 1)] + 1;
    }
    return out;
}

Expr FoliatedKForm::at(const std::vector<int>& idx) const
{
    std::vector<int> s = idx;
    int sign = sort_sign(s);
    if (sign == 0)
        return Expr();
    auto subsets = k_subsets(presentation.rank(), degree);
    auto it = std::lower_bound(subsets.begin(), subsets.end(), s);
    if (it == subsets.end() || *it != s)
        throw Error(ErrorKind::InvalidArgument, "index outside the frame");
    const Expr& v = entries[static_cast<size_t>(it - subsets.begin())];
    return sign > 0 ? v : -v;
}

FoliatedKForm zero_form(const LocalPresentation& p, int k)
{
    if (k < 0 || k > p.rank())
        throw Error(ErrorKind::DegreeOverflow, "degree " + std::to_string(k) + " above rank " + std::to_string(p.rank()));
    return FoliatedKForm{k, p, ExprVec(k_subsets(p.rank(), k).size())};
}

FoliatedKForm function_form(const LocalPresentation& p, const Expr& u)
{
    return FoliatedKForm{0, p, {u}};
}

CoordinateForm exterior_derivative(const CoordinateForm& w)
{
    const int n = w.chart.dim();
    if (w.degree + 1 > n)
        throw Error(ErrorKind::DegreeOverflow, "coordinate form degree above the dimension");
    auto pos = position_map(n, w.degree);
    CoordinateForm r{w.chart, w.degree + 1, {}};
    for (const auto& s : k_subsets(n, w.degree + 1)) {
        Expr v;
        for (size_t a = 0; a < s.size(); ++a)
            v += parity(a) * differentiate(w.entries[pos.at(without(s, a))], s[a]);
        r.entries.push_back(v);
    }
    return r;
}

FoliatedKForm realize_form(const CoordinateForm& w, const LocalPresentation& p)
{
    if (!(w.chart == p.chart))
        throw Error(ErrorKind::InvalidArgument, "form and presentation on different charts");
    FoliatedKForm eta = zero_form(p, w.degree);
    ExprMat a = p.anchor_matrix();
    auto rows = k_subsets(w.chart.dim(), w.degree);
    auto cols = k_subsets(p.rank(), w.degree);
    for (size_t i = 0; i < cols.size(); ++i)
        for (size_t j = 0; j < rows.size(); ++j)
            if (!w.entries[j].is_zero())
                eta.entries[i] += w.entries[j] * minor_det(a, rows[j], cols[i]);
    return eta;
}

FoliatedKForm ce_differential(const FoliatedKForm& eta, const StructureCoefficients& sc)
{
    const LocalPresentation& p = eta.presentation;
    const int r = p.rank();
    if (eta.degree + 1 > r)
        throw Error(ErrorKind::DegreeOverflow, "degree " + std::to_string(eta.degree + 1) + " above rank " + std::to_string(r));
    if (sc.rank != r)
        throw Error(ErrorKind::InvalidArgument, "structure coefficients for a different frame");
    FoliatedKForm out = zero_form(p, eta.degree + 1);
    auto subsets = k_subsets(r, eta.degree + 1);
    for (size_t s = 0; s < subsets.size(); ++s) {
        const IndexSet& I = subsets[s];
        Expr v;
        for (size_t a = 0; a < I.size(); ++a)
            v += parity(a) * apply(p.anchor[static_cast<size_t>(I[a])], eta.at(without(I, a)));
        for (size_t a = 0; a < I.size(); ++a)
            for (size_t b = a + 1; b < I.size(); ++b)
                for (int m = 0; m < r; ++m) {
                    const Expr& c = sc.c(m, I[a], I[b]);
                    if (c.is_zero())
                        continue;
                    std::vector<int> idx{m};
                    for (int t : without(I, a, b))
                        idx.push_back(t);
                    v += parity(a + b) * c * eta.at(idx);
                }
        out.entries[s] = v;
    }
    return out;
}

bool FormOperator::is_zero() const
{
    for (const auto& row : entries)
        for (const auto& e : row)
            if (!e.is_zero())
                return false;
    return true;
}

FormOperator ce_operator(const LocalPresentation& p, const StructureCoefficients& sc, int k)
{
    const int r = p.rank();
    if (k < 0 || k + 1 > r)
        throw Error(ErrorKind::DegreeOverflow, "degree " + std::to_string(k + 1) + " above rank " + std::to_string(r));
    if (sc.rank != r)
        throw Error(ErrorKind::InvalidArgument, "structure coefficients for a different frame");
    FormOperator d = zero_operator(p.chart, r, k, k + 1);
    auto rows = k_subsets(r, k + 1);
    auto cols = position_map(r, k);
    for (size_t i = 0; i < rows.size(); ++i) {
        const IndexSet& I = rows[i];
        // Anchor part: (-1)^a X_(i_a) on the column with i_a removed.
        for (size_t a = 0; a < I.size(); ++a) {
            DiffOperator x = DiffOperator::from_field(p.anchor[static_cast<size_t>(I[a])]);
            auto& e = d.entries[i][cols.at(without(I, a))];
            e = a % 2 == 0 ? e + x : e - x;
        }
        // Bracket part: c^m_(i_a i_b) moved onto the column {m} u I \ {i_a, i_b}.
        for (size_t a = 0; a < I.size(); ++a)
            for (size_t b = a + 1; b < I.size(); ++b) {
                IndexSet rest = without(I, a, b);
                for (int m = 0; m < r; ++m) {
                    const Expr& c = sc.c(m, I[a], I[b]);
                    if (c.is_zero() || std::binary_search(rest.begin(), rest.end(), m))
                        continue;
                    // Inserting m in front of the increasing rest: sign (-1)^(# below m).
                    auto below = static_cast<size_t>(std::lower_bound(rest.begin(), rest.end(), m) - rest.begin());
                    IndexSet col = rest;
                    col.insert(col.begin() + static_cast<std::ptrdiff_t>(below), m);
                    auto& e = d.entries[i][cols.at(col)];
                    e = e + DiffOperator::multiplication(p.chart, parity(a + b + below) * c);
                }
            }
    }
    return d;
}

FoliatedKForm apply(const FormOperator& d, const FoliatedKForm& eta)
{
    if (eta.degree != d.from_degree)
        throw Error(ErrorKind::InvalidArgument, "form degree does not match the operator");
    FoliatedKForm out = zero_form(eta.presentation, d.to_degree);
    for (size_t i = 0; i < d.entries.size(); ++i)
        for (size_t j = 0; j < d.entries[i].size(); ++j)
            if (!d.entries[i][j].is_zero())
                out.entries[i] += apply(d.entries[i][j], eta.entries[j]);
    return out;
}

FormOperator compose(const FormOperator& a, const FormOperator& b)
{
    if (a.from_degree != b.to_degree)
        throw Error(ErrorKind::InvalidArgument, "degrees do not chain");
    FormOperator r = zero_operator(a.chart, a.rank, b.from_degree, a.to_degree);
    for (size_t i = 0; i < a.entries.size(); ++i)
        for (size_t l = 0; l < b.entries.size(); ++l) {
            if (a.entries[i][l].is_zero())
                continue;
            for (size_t j = 0; j < b.entries[l].size(); ++j)
                if (!b.entries[l][j].is_zero())
                    r.entries[i][j] = r.entries[i][j] + compose(a.entries[i][l], b.entries[l][j]);
        }
    return r;
}

FormOperator operator+(const FormOperator& a, const FormOperator& b)
{
    if (a.from_degree != b.from_degree || a.to_degree != b.to_degree)
        throw Error(ErrorKind::InvalidArgument, "degrees do not match");
    FormOperator r = a;
    for (size_t i = 0; i < r.entries.size(); ++i)
        for (size_t j = 0; j < r.entries[i].size(); ++j)
            r.entries[i][j] = r.entries[i][j] + b.entries[i][j];
    return r;
}

ExprMat exterior_gram(const LocalPresentation& p, int k)
{
    const int r = p.rank();
    ExprMat ginv = p.metric_is_identity() ? identity_matrix(r) : inverse(p.frame_metric, p.base_region);
    auto subsets = k_subsets(r, k);
    ExprMat h = zero_matrix(static_cast<int>(subsets.size()), static_cast<int>(subsets.size()));
    for (size_t i = 0; i < subsets.size(); ++i)
        for (size_t j = 0; j < subsets.size(); ++j)
            h[i][j] = minor_det(ginv, subsets[i], subsets[j]);
    return h;
}

bool ComplexReport::all_zero() const
{
    return std::all_of(d_squared_zero.begin(), d_squared_zero.end(), [](bool b) { return b; }) &&
           std::all_of(corpus_failures.begin(), corpus_failures.end(), [](int v) { return v == 0; }) &&
           std::all_of(naturality_failures.begin(), naturality_failures.end(), [](int v) { return v == 0; });
}

ComplexReport d_squared_check(const LocalPresentation& p, const StructureCoefficients& sc, int k_max)
{
    const int r = p.rank();
    if (k_max < 0 || k_max + 2 > r)
        throw Error(ErrorKind::DegreeOverflow, "d_(k+1) d_k needs degree " + std::to_string(k_max + 2) +
                                                   " above rank " + std::to_string(r));
    ComplexReport rep;
    rep.k_max = k_max;
    rep.gauge = sc.gauge;
    for (int k = 0; k <= k_max + 1; ++k)
        rep.d.push_back(ce_operator(p, sc, k));
    const int n = p.chart.dim();
    for (int k = 0; k <= k_max; ++k) {
        rep.d_squared_zero.push_back(compose(rep.d[static_cast<size_t>(k + 1)], rep.d[static_cast<size_t>(k)]).is_zero());
        int failures = 0, unnatural = 0;
        if (k <= n) {
            auto coordinate_sets = k_subsets(n, k);
            for (size_t j = 0; j < coordinate_sets.size(); ++j)
                for (const auto& f : corpus(p.chart)) {
                    CoordinateForm w{p.chart, k, ExprVec(coordinate_sets.size())};
                    w.entries[j] = f;
                    FoliatedKForm eta = realize_form(w, p);
                    FoliatedKForm d1 = ce_differential(eta, sc);
                    FoliatedKForm d2 = ce_differential(d1, sc);
                    if (!std::all_of(d2.entries.begin(), d2.entries.end(), [](const Expr& e) { return e.is_zero(); }))
                        ++failures;
                    if (k + 1 <= n) {
                        FoliatedKForm natural = realize_form(exterior_derivative(w), p);
                        for (size_t s = 0; s < d1.entries.size(); ++s)
                            if (!identical(d1.entries[s], natural.entries[s])) {
                                ++unnatural;
                                break;
                            }
                    }
                }
        }
        rep.corpus_failures.push_back(failures);
        rep.naturality_failures.push_back(unnatural);
    }
    const int top = max_pointwise_rank(p);
    for (int k = top + 1; k <= r; ++k)
        rep.realization_constrained.push_back(k);
    return rep;
}

FormOperator ce_adjoint(const LocalPresentation& p, const StructureCoefficients& sc, int k, const Density& mu)
{
    FormOperator star = adjoint_entries(ce_operator(p, sc, k), mu);
    ExprMat hk = exterior_gram(p, k), hk1 = exterior_gram(p, k + 1);
    if (!is_identity(hk1))
        star = right_multiply(star, hk1);
    if (!is_identity(hk))
        star = left_multiply(inverse(hk, p.base_region), star);
    return star;
}

HodgeLaplacian hodge_laplacian(int k, const LocalPresentation& p, const StructureCoefficients& sc, const Density& mu)
{
    const int r = p.rank();
    if (k < 0 || k > r)
        throw Error(ErrorKind::DegreeOverflow, "degree " + std::to_string(k) + " above rank " + std::to_string(r));
    HodgeLaplacian h;
    h.degree = k;
    h.density = mu;
    h.op = zero_operator(p.chart, r, k, k);
    if (k >= 1) {
        h.d_down = ce_operator(p, sc, k - 1);
        h.star_down = ce_adjoint(p, sc, k - 1, mu);
        h.op = h.op + compose(h.d_down, h.star_down);
    }
    if (k < r) {
        h.d_up = ce_operator(p, sc, k);
        h.star_up = ce_adjoint(p, sc, k, mu);
        h.op = h.op + compose(h.star_up, h.d_up);
    }
    return h;
}

double form_inner_product(const FoliatedKForm& a, const FoliatedKForm& b, const Density& mu, const Box& box, int points)
{
    if (a.degree != b.degree)
        throw Error(ErrorKind::InvalidArgument, "forms of different degree");
    ExprMat h = exterior_gram(a.presentation, a.degree);
    const size_t m = a.entries.size();
    std::vector<CompiledExpr> ca, cb;
    for (size_t i = 0; i < m; ++i) {
        ca.emplace_back(a.entries[i]);
        cb.emplace_back(b.entries[i]);
    }
    std::vector<std::vector<CompiledExpr>> ch(m);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j)
            ch[i].emplace_back(h[i][j]);
    CompiledExpr w(mu.weight);
    return integrate(
        [&](const Point& p) {
            std::vector<double> va(m), vb(m);
            for (size_t i = 0; i < m; ++i) {
                va[i] = ca[i](p);
                vb[i] = cb[i](p);
            }
            double s = 0.0;
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < m; ++j)
                    if (va[i] != 0.0 && vb[j] != 0.0)
                        s += va[i] * ch[i][j](p) * vb[j];
            return s * w(p);
        },
        box, points);
}

} // namespace hlap
