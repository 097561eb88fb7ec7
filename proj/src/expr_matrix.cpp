#include "hlap/expr_matrix.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <map>

namespace hlap {

ExprMat zero_matrix(int rows, int cols)
{
    return ExprMat(static_cast<size_t>(rows), ExprVec(static_cast<size_t>(cols)));
}

ExprMat identity_matrix(int n)
{
    ExprMat m = zero_matrix(n, n);
    for (int i = 0; i < n; ++i)
        m[i][i] = Expr(1);
    return m;
}

ExprMat transpose(const ExprMat& a)
{
    if (a.empty())
        return {};
    ExprMat t = zero_matrix(static_cast<int>(a[0].size()), static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[i].size(); ++j)
            t[j][i] = a[i][j];
    return t;
}

ExprMat matmul(const ExprMat& a, const ExprMat& b)
{
    if (a.empty() || b.empty())
        return {};
    const size_t n = a.size(), k = b.size(), m = b[0].size();
    if (a[0].size() != k)
        throw Error(ErrorKind::InvalidArgument, "matrix shapes do not match");
    ExprMat c = zero_matrix(static_cast<int>(n), static_cast<int>(m));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) {
            Expr s;
            for (size_t l = 0; l < k; ++l)
                if (!a[i][l].is_zero() && !b[l][j].is_zero())
                    s += a[i][l] * b[l][j];
            c[i][j] = s;
        }
    return c;
}

ExprVec matvec(const ExprMat& a, const ExprVec& v)
{
    ExprVec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != v.size())
            throw Error(ErrorKind::InvalidArgument, "matrix and vector shapes do not match");
        for (size_t j = 0; j < v.size(); ++j)
            if (!a[i][j].is_zero() && !v[j].is_zero())
                r[i] += a[i][j] * v[j];
    }
    return r;
}

namespace {

size_t complexity(const Expr& e)
{
    if (e.is_piecewise())
        return 4 + complexity(e.pw_then()) + complexity(e.pw_else());
    size_t s = 0;
    for (const auto& t : e.terms()) {
        s += 1;
        for (const auto& f : t.factors)
            s += 1 + (f.arg ? 2 * complexity(Expr(f.arg)) : 0);
    }
    return s;
}

} // namespace

LinearSolve solve_linear(const ExprMat& a, const ExprVec& b, const Box& region)
{
    const size_t m = a.size();
    const size_t k = m ? a[0].size() : 0;
    if (b.size() != m)
        throw Error(ErrorKind::InvalidArgument, "right-hand side length mismatch");
    // Augmented matrix [A | b].
    ExprMat r(m, ExprVec(k + 1));
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < k; ++j)
            r[i][j] = a[i][j];
        r[i][k] = b[i];
    }
    LinearSolve out;
    size_t row = 0;
    for (size_t col = 0; col < k && row < m; ++col) {
        size_t best = m;
        size_t best_cost = 0;
        for (size_t i = row; i < m; ++i) {
            if (is_zero_robust(r[i][col], region))
                continue;
            size_t c = complexity(r[i][col]);
            if (best == m || c < best_cost) {
                best = i;
                best_cost = c;
            }
        }
        if (best == m)
            continue;
        std::swap(r[row], r[best]);
        Expr inv = r[row][col].recip();
        for (size_t j = col; j <= k; ++j)
            if (!r[row][j].is_zero())
                r[row][j] = j == col ? Expr(1) : r[row][j] * inv;
        for (size_t i = 0; i < m; ++i) {
            if (i == row || r[i][col].is_zero())
                continue;
            Expr f = r[i][col];
            for (size_t j = col; j <= k; ++j)
                if (!r[row][j].is_zero())
                    r[i][j] = j == col ? Expr() : r[i][j] - f * r[row][j];
        }
        out.pivot_columns.push_back(static_cast<int>(col));
        ++row;
    }
    out.rank = static_cast<int>(row);
    out.consistent = true;
    for (size_t i = row; i < m; ++i)
        if (!is_zero_robust(r[i][k], region))
            out.consistent = false;
    out.particular.assign(k, Expr());
    for (size_t p = 0; p < out.pivot_columns.size(); ++p)
        out.particular[static_cast<size_t>(out.pivot_columns[p])] = r[p][k];
    for (size_t f = 0; f < k; ++f) {
        if (std::find(out.pivot_columns.begin(), out.pivot_columns.end(), static_cast<int>(f)) !=
            out.pivot_columns.end())
            continue;
        ExprVec v(k);
        v[f] = Expr(1);
        for (size_t p = 0; p < out.pivot_columns.size(); ++p)
            v[static_cast<size_t>(out.pivot_columns[p])] = -r[p][f];
        out.nullspace.push_back(std::move(v));
    }
    return out;
}

ExprMat inverse(const ExprMat& a, const Box& region)
{
    const size_t n = a.size();
    ExprMat inv = zero_matrix(static_cast<int>(n), static_cast<int>(n));
    for (size_t c = 0; c < n; ++c) {
        ExprVec e(n);
        e[c] = Expr(1);
        auto s = solve_linear(a, e, region);
        if (s.rank != static_cast<int>(n) || !s.consistent)
            throw Error(ErrorKind::RankDeficient, "matrix is not invertible on the region");
        for (size_t i = 0; i < n; ++i)
            inv[i][c] = s.particular[i];
    }
    return inv;
}

Expr determinant(const ExprMat& a, const Box& region)
{
    const size_t n = a.size();
    if (n == 0)
        return Expr(1);
    if (n == 1)
        return a[0][0];
    if (n == 2)
        return a[0][0] * a[1][1] - a[0][1] * a[1][0];
    // Laplace expansion along the sparsest row keeps entries fraction free.
    size_t best = 0, best_nz = n + 1;
    for (size_t i = 0; i < n; ++i) {
        size_t nz = 0;
        for (const auto& e : a[i])
            nz += e.is_zero() ? 0 : 1;
        if (nz < best_nz) {
            best_nz = nz;
            best = i;
        }
    }
    Expr det;
    for (size_t j = 0; j < n; ++j) {
        if (a[best][j].is_zero())
            continue;
        ExprMat minor;
        for (size_t i = 0; i < n; ++i) {
            if (i == best)
                continue;
            ExprVec rowv;
            for (size_t c = 0; c < n; ++c)
                if (c != j)
                    rowv.push_back(a[i][c]);
            minor.push_back(std::move(rowv));
        }
        Expr term = a[best][j] * determinant(minor, region);
        det = ((best + j) % 2 == 0) ? det + term : det - term;
    }
    return det;
}

std::optional<Expr> exact_sqrt(const Expr& e)
{
    if (e.is_piecewise())
        return std::nullopt;
    if (e.is_zero())
        return Expr();
    if (e.terms().size() != 1)
        return std::nullopt;
    const Term& t = e.terms()[0];
    if (sgn(t.coeff) <= 0)
        return std::nullopt;
    mpz_class n = t.coeff.get_num(), d = t.coeff.get_den();
    if (!mpz_perfect_square_p(n.get_mpz_t()) || !mpz_perfect_square_p(d.get_mpz_t()))
        return std::nullopt;
    mpz_class sn, sd;
    mpz_sqrt(sn.get_mpz_t(), n.get_mpz_t());
    mpz_sqrt(sd.get_mpz_t(), d.get_mpz_t());
    Term unit = t;
    unit.coeff = 1;
    for (const auto& f : unit.factors)
        if ((f.kind == AtomKind::Coord || f.kind == AtomKind::Base) && f.exp.get_num() % 2 != 0)
            return std::nullopt;
    try {
        Expr whole = e * Expr(Rational(1) / t.coeff);
        return whole.pow_rational(Rational(1, 2)) * Expr(Rational(sn, sd));
    } catch (const Error&) {
        return std::nullopt;
    }
}

ExprMat cholesky(const ExprMat& g, const Box& region)
{
    const size_t n = g.size();
    ExprMat l = zero_matrix(static_cast<int>(n), static_cast<int>(n));
    for (size_t j = 0; j < n; ++j) {
        Expr d = g[j][j];
        for (size_t k = 0; k < j; ++k)
            d -= l[j][k] * l[j][k];
        if (is_zero_robust(d, region))
            throw Error(ErrorKind::NonSymbolicCholesky, "matrix is not positive definite");
        auto s = exact_sqrt(d);
        if (!s)
            throw Error(ErrorKind::NonSymbolicCholesky, "diagonal entry has no exact square root");
        l[j][j] = *s;
        Expr inv = s->recip();
        for (size_t i = j + 1; i < n; ++i) {
            Expr v = g[i][j];
            for (size_t k = 0; k < j; ++k)
                v -= l[i][k] * l[j][k];
            l[i][j] = v * inv;
        }
    }
    return l;
}

// ---------------------------------------------------------------------------
// Exact polynomial ansatz over the rationals.

namespace {

using Mono = std::vector<long>;
using PolyMap = std::map<Mono, Rational>;

PolyMap to_poly(const Expr& e, int dim)
{
    PolyMap p;
    for (const auto& t : e.terms()) {
        Mono m(static_cast<size_t>(dim), 0);
        for (const auto& f : t.factors)
            m[static_cast<size_t>(f.var)] = f.exp.get_num().get_si();
        p[m] += t.coeff;
    }
    return p;
}

std::vector<Mono> monomials_up_to(int dim, int deg)
{
    std::vector<Mono> out;
    for (const auto& a : multi_indices(dim, deg))
        out.emplace_back(a.begin(), a.end());
    return out;
}

Expr from_mono(const Mono& m, const Rational& c)
{
    Expr e(c);
    for (size_t i = 0; i < m.size(); ++i)
        if (m[i])
            e = e * Expr::coord(static_cast<int>(i)).pow(m[i]);
    return e;
}

// Reduced row echelon solve over mpq; returns a particular solution or nullopt.
std::optional<std::vector<Rational>> rref_solve(std::vector<std::vector<Rational>> a, std::vector<Rational> b)
{
    const size_t m = a.size();
    const size_t n = m ? a[0].size() : 0;
    std::vector<size_t> piv;
    size_t row = 0;
    for (size_t col = 0; col < n && row < m; ++col) {
        size_t p = m;
        for (size_t i = row; i < m; ++i)
            if (sgn(a[i][col]) != 0) {
                p = i;
                break;
            }
        if (p == m)
            continue;
        std::swap(a[row], a[p]);
        std::swap(b[row], b[p]);
        Rational inv = 1 / a[row][col];
        for (size_t j = col; j < n; ++j)
            a[row][j] *= inv;
        b[row] *= inv;
        for (size_t i = 0; i < m; ++i) {
            if (i == row || sgn(a[i][col]) == 0)
                continue;
            Rational f = a[i][col];
            for (size_t j = col; j < n; ++j)
                if (sgn(a[row][j]) != 0)
                    a[i][j] -= f * a[row][j];
            b[i] -= f * b[row];
        }
        piv.push_back(col);
        ++row;
    }
    for (size_t i = row; i < m; ++i)
        if (sgn(b[i]) != 0)
            return std::nullopt;
    std::vector<Rational> x(n, Rational(0));
    for (size_t r = 0; r < piv.size(); ++r)
        x[piv[r]] = b[r];
    return x;
}

} // namespace

std::optional<ExprVec> polynomial_solve(const ExprMat& a, const ExprVec& b, int dim, int max_degree)
{
    const size_t m = a.size();
    const size_t k = m ? a[0].size() : 0;
    for (const auto& row : a)
        for (const auto& e : row)
            if (!is_polynomial(e))
                return std::nullopt;
    for (const auto& e : b)
        if (!is_polynomial(e))
            return std::nullopt;
    std::vector<std::vector<PolyMap>> pa(m, std::vector<PolyMap>(k));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < k; ++j)
            pa[i][j] = to_poly(a[i][j], dim);
    std::vector<PolyMap> pb(m);
    for (size_t i = 0; i < m; ++i)
        pb[i] = to_poly(b[i], dim);

    for (int deg = 0; deg <= max_degree; ++deg) {
        auto monos = monomials_up_to(dim, deg);
        const size_t nm = monos.size();
        // Equation index: (row i, product monomial).
        std::map<std::pair<size_t, Mono>, size_t> eq_index;
        std::vector<std::vector<std::pair<size_t, Rational>>> rows;
        auto eq = [&](size_t i, const Mono& mono) {
            auto key = std::make_pair(i, mono);
            auto it = eq_index.find(key);
            if (it != eq_index.end())
                return it->second;
            size_t id = rows.size();
            eq_index.emplace(key, id);
            rows.emplace_back();
            return id;
        };
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < k; ++j)
                for (const auto& [am, ac] : pa[i][j])
                    for (size_t u = 0; u < nm; ++u) {
                        Mono prod(static_cast<size_t>(dim));
                        for (int v = 0; v < dim; ++v)
                            prod[static_cast<size_t>(v)] = am[static_cast<size_t>(v)] + monos[u][static_cast<size_t>(v)];
                        rows[eq(i, prod)].emplace_back(j * nm + u, ac);
                    }
        std::vector<Rational> rhs(rows.size(), Rational(0));
        bool unreachable = false;
        for (size_t i = 0; i < m; ++i)
            for (const auto& [bm, bc] : pb[i]) {
                auto key = std::make_pair(i, bm);
                auto it = eq_index.find(key);
                if (it == eq_index.end()) {
                    unreachable = true;
                    break;
                }
                rhs[it->second] = bc;
            }
        if (unreachable)
            continue;
        std::vector<std::vector<Rational>> dense(rows.size(), std::vector<Rational>(k * nm, Rational(0)));
        for (size_t r = 0; r < rows.size(); ++r)
            for (const auto& [c, v] : rows[r])
                dense[r][c] += v;
        auto x = rref_solve(std::move(dense), std::move(rhs));
        if (!x)
            continue;
        ExprVec out(k);
        for (size_t j = 0; j < k; ++j)
            for (size_t u = 0; u < nm; ++u)
                if (sgn((*x)[j * nm + u]) != 0)
                    out[j] += from_mono(monos[u], (*x)[j * nm + u]);
        return out;
    }
    return std::nullopt;
}

} // namespace hlap
