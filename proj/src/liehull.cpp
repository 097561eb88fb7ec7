#include "hlap/liehull.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>

namespace hlap {

namespace {

int field_pole_order(const VectorField& x)
{
    int m = 0;
    for (const auto& c : x.coeffs)
        m = std::max(m, max_pole_order(c));
    return m;
}

bool contains_identical(const std::vector<VectorField>& fs, const VectorField& x)
{
    return std::any_of(fs.begin(), fs.end(), [&](const VectorField& f) { return identical(f, x); });
}

std::vector<int> grid_ranks(const std::vector<VectorField>& fields, const std::vector<Point>& grid)
{
    Distribution d(fields.front().chart, fields);
    ExprMat m = d.matrix();
    std::vector<int> out;
    out.reserve(grid.size());
    for (const auto& p : grid)
        out.push_back(numeric_rank(evaluate_matrix(m, p)));
    return out;
}

// Pole orders strictly increasing over at least three consecutive depths.
bool strictly_growing(const std::vector<int>& orders)
{
    if (orders.size() < 3)
        return false;
    for (size_t i = 1; i < orders.size(); ++i)
        if (orders[i] <= orders[i - 1])
            return false;
    return true;
}

} // namespace

std::vector<VectorField> HullReport::all_fields() const
{
    std::vector<VectorField> out;
    for (const auto& level : new_fields_per_depth)
        out.insert(out.end(), level.begin(), level.end());
    return out;
}

HullReport hull_generate(const Distribution& d, int max_depth)
{
    if (max_depth < 1 || max_depth > kMaxHullDepth)
        throw Error(ErrorKind::InvalidArgument, "hull depth must lie in 1.." + std::to_string(kMaxHullDepth));
    if (d.generators.empty())
        throw Error(ErrorKind::InvalidArgument, "distribution without generators");
    const Box& region = d.chart.region;

    HullReport r;
    r.depth = max_depth;
    r.grid = grid_points(region, kHullGridPerAxis);
    std::vector<VectorField> span = d.generators;
    r.new_fields_per_depth.push_back(d.generators);
    r.uncertified_per_depth.emplace_back();
    r.rank_by_depth.push_back(grid_ranks(span, r.grid));
    r.pole_order_per_depth.push_back(0);
    for (const auto& g : d.generators)
        r.pole_order_per_depth[0] = std::max(r.pole_order_per_depth[0], field_pole_order(g));

    bool last_closed = true;
    for (int s = 2; s <= max_depth; ++s) {
        std::vector<VectorField> candidates;
        const auto& prev = r.new_fields_per_depth.back();
        for (size_t i = 0; i < d.generators.size(); ++i)
            for (size_t j = 0; j < prev.size(); ++j) {
                // At depth 2 each unordered generator pair once.
                if (s == 2 && j <= i)
                    continue;
                VectorField b = lie_bracket(d.generators[i], prev[j]);
                if (!b.is_zero() && !contains_identical(candidates, b))
                    candidates.push_back(b);
            }

        std::vector<VectorField> added, uncertified;
        bool closed = true;
        for (const auto& b : candidates) {
            bool certified_member = false;
            bool sampled = false;
            try {
                MembershipResult m = module_membership(b, span, region, MembershipMode::Auto);
                certified_member = m.member && m.certified;
                sampled = !m.certified;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Inconclusive)
                    throw;
                sampled = true;
            }
            if (certified_member)
                continue;
            closed = false;
            span.push_back(b);
            added.push_back(b);
            if (sampled)
                uncertified.push_back(b);
        }
        last_closed = closed;
        if (added.empty()) {
            // Nothing new: deeper brackets are members as well.
            r.new_fields_per_depth.emplace_back();
            r.uncertified_per_depth.emplace_back();
            r.rank_by_depth.push_back(r.rank_by_depth.back());
            r.pole_order_per_depth.push_back(0);
            break;
        }
        int pole = 0;
        for (const auto& f : added)
            pole = std::max(pole, field_pole_order(f));
        r.new_fields_per_depth.push_back(added);
        r.uncertified_per_depth.push_back(uncertified);
        r.rank_by_depth.push_back(grid_ranks(span, r.grid));
        r.pole_order_per_depth.push_back(pole);
    }
    r.depth = static_cast<int>(r.new_fields_per_depth.size());
    // Depth 1 checks no bracket, so closure is not claimed there.
    r.membership_closed = max_depth > 1 && last_closed;

    const auto& ranks = r.rank_profile();
    r.bracket_generating =
        std::all_of(ranks.begin(), ranks.end(), [&](int k) { return k == d.chart.dim(); });

    std::vector<int> orders;
    for (size_t s = 0; s < r.new_fields_per_depth.size() && !r.new_fields_per_depth[s].empty(); ++s)
        orders.push_back(r.pole_order_per_depth[s]);
    r.suspicious_growth = strictly_growing(orders);
    return r;
}

Distribution hull_distribution(const HullReport& r, const Distribution& d)
{
    return Distribution(d.chart, r.all_fields(), d.label.empty() ? "hull" : d.label + "_hull");
}

StructureCoefficients commuting_coefficients(const Chart& c, int rank)
{
    StructureCoefficients sc;
    sc.chart = c;
    sc.rank = rank;
    sc.table.assign(static_cast<size_t>(rank),
                    std::vector<ExprVec>(static_cast<size_t>(rank), ExprVec(static_cast<size_t>(rank), Expr())));
    sc.gauge = "zero";
    return sc;
}

StructureCoefficients structure_coefficients(const Distribution& f)
{
    const Box& region = f.chart.region;
    const int k = f.size();
    StructureCoefficients sc = commuting_coefficients(f.chart, k);
    sc.mode = MembershipMode::Symbolic;
    sc.gauge = "symbolic solve, lexicographic pivots, free unknowns zero";

    std::vector<std::vector<VectorField>> brackets(static_cast<size_t>(k), std::vector<VectorField>(static_cast<size_t>(k)));
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            VectorField b = lie_bracket(f.generators[static_cast<size_t>(i)], f.generators[static_cast<size_t>(j)]);
            brackets[static_cast<size_t>(i)][static_cast<size_t>(j)] = b;
            if (b.is_zero())
                continue;
            MembershipResult m = module_membership(b, f.generators, region, MembershipMode::Symbolic);
            if (!(m.member && m.certified))
                throw Error(ErrorKind::NotInvolutive, "[X" + std::to_string(i + 1) + ", X" + std::to_string(j + 1) +
                                                          "] = " + to_string(b) + " is not a certified member");
            for (int c = 0; c < k; ++c) {
                sc.table[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(c)] = m.coefficients[static_cast<size_t>(c)];
                sc.table[static_cast<size_t>(j)][static_cast<size_t>(i)][static_cast<size_t>(c)] = -m.coefficients[static_cast<size_t>(c)];
            }
        }

    // Defining identity at points distinct from any used by the solver.
    const int n = f.chart.dim();
    std::vector<std::vector<CompiledExpr>> gen(static_cast<size_t>(k));
    for (int a = 0; a < k; ++a)
        for (const auto& e : f.generators[static_cast<size_t>(a)].coeffs)
            gen[static_cast<size_t>(a)].emplace_back(e);
    for (const auto& p : sample_points(region, 64, 0xc0ffee17ULL)) {
        std::vector<std::vector<double>> xv(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(n)));
        for (int a = 0; a < k; ++a)
            for (int r = 0; r < n; ++r)
                xv[static_cast<size_t>(a)][static_cast<size_t>(r)] = gen[static_cast<size_t>(a)][static_cast<size_t>(r)](p);
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                const auto& b = brackets[static_cast<size_t>(i)][static_cast<size_t>(j)];
                for (int r = 0; r < n; ++r) {
                    double lhs = b.coeffs.empty() ? 0.0 : evaluate(b.coeffs[static_cast<size_t>(r)], p);
                    double rhs = 0.0;
                    for (int c = 0; c < k; ++c)
                        rhs += evaluate(sc.c(c, i, j), p) * xv[static_cast<size_t>(c)][static_cast<size_t>(r)];
                    sc.residual = std::max(sc.residual, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
                }
            }
    }
    return sc;
}

InvolutivityResult is_involutive(const Distribution& d)
{
    const Box& region = d.chart.region;
    InvolutivityResult out;
    for (int i = 0; i < d.size(); ++i)
        for (int j = i + 1; j < d.size(); ++j) {
            VectorField b = lie_bracket(d.generators[static_cast<size_t>(i)], d.generators[static_cast<size_t>(j)]);
            if (b.is_zero())
                continue;
            MembershipResult m = module_membership(b, d.generators, region, MembershipMode::Auto);
            if (m.member && m.certified)
                continue;
            out.involutive = false;
            out.pair = {i, j};
            out.witness = b;
            out.witness_certified = m.certified;
            return out;
        }
    return out;
}

} // namespace hlap
