#include "hlap/quadrature.hpp"

#include "hlap/error.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace hlap {

GaussRule gauss_legendre(int n)
{
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(n); it != cache.end())
        return it->second;
    GaussRule r;
    r.nodes.resize(static_cast<size_t>(n));
    r.weights.resize(static_cast<size_t>(n));
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
            double pn1 = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pn1) / (x * x - 1.0);
            double dx = pn / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16)
                break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[static_cast<size_t>(i)] = -x;
        r.nodes[static_cast<size_t>(n - 1 - i)] = x;
        r.weights[static_cast<size_t>(i)] = w;
        r.weights[static_cast<size_t>(n - 1 - i)] = w;
    }
    cache.emplace(n, r);
    return r;
}

double integrate(const std::function<double(const Point&)>& f, const Box& box, int points_per_axis)
{
    for (const auto& iv : box)
        if (!iv.bounded())
            throw Error(ErrorKind::InvalidArgument, "quadrature needs a bounded box");
    const GaussRule rule = gauss_legendre(points_per_axis);
    const size_t n = box.size();
    const size_t q = static_cast<size_t>(points_per_axis);
    std::vector<size_t> idx(n, 0);
    Point p(n);
    double vol = 1.0;
    for (const auto& iv : box)
        vol *= 0.5 * (iv.hi - iv.lo);
    size_t total = 1;
    for (size_t i = 0; i < n; ++i)
        total *= q;
    // Kahan summation keeps the reduction order-independent to rounding level.
    double sum = 0.0, comp = 0.0;
    for (size_t k = 0; k < total; ++k) {
        double w = vol;
        for (size_t i = 0; i < n; ++i) {
            const auto& iv = box[i];
            p[i] = 0.5 * (iv.lo + iv.hi) + 0.5 * (iv.hi - iv.lo) * rule.nodes[idx[i]];
            w *= rule.weights[idx[i]];
        }
        double y = w * f(p) - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        for (size_t i = 0; i < n; ++i) {
            if (++idx[i] < q)
                break;
            idx[i] = 0;
        }
    }
    return sum;
}

double integrate(const Expr& e, const Box& box, int points_per_axis)
{
    CompiledExpr c(e);
    return integrate([&](const Point& p) { return c(p); }, box, points_per_axis);
}

Expr bump_factor(const Box& box, int axis)
{
    const auto& iv = box.at(static_cast<size_t>(axis));
    if (!iv.bounded())
        throw Error(ErrorKind::InvalidArgument, "bump needs a bounded box");
    Rational lo(iv.lo), hi(iv.hi);
    Expr t = (Expr(2) * Expr::coord(axis) - Expr(lo + hi)) * Expr(Rational(1) / (hi - lo));
    return (Expr(1) - t * t).pow(4);
}

Expr bump(const Box& box)
{
    Expr b(1);
    for (size_t i = 0; i < box.size(); ++i)
        b = b * bump_factor(box, static_cast<int>(i));
    return b;
}

} // namespace hlap
