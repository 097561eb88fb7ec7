#include "hlap/chart.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace hlap {

bool Interval::bounded() const
{
    return std::isfinite(lo) && std::isfinite(hi);
}

Interval Interval::window() const
{
    if (bounded())
        return *this;
    if (std::isfinite(lo))
        return {lo, lo + 4.0};
    if (std::isfinite(hi))
        return {hi - 4.0, hi};
    return {-2.0, 2.0};
}

Box unbounded_box(int dim)
{
    return Box(static_cast<size_t>(dim));
}

Box intersect(const Box& a, const Box& b)
{
    Box r(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        r[i].lo = std::max(a[i].lo, b[i].lo);
        r[i].hi = std::min(a[i].hi, b[i].hi);
    }
    return r;
}

bool is_empty(const Box& b)
{
    for (const auto& iv : b)
        if (!(iv.lo < iv.hi))
            return true;
    return false;
}

bool contains(const Box& b, const Point& p)
{
    for (size_t i = 0; i < b.size(); ++i)
        if (!b[i].contains(p[i]))
            return false;
    return true;
}

Chart::Chart(std::vector<std::string> coord_names, Box box)
    : names(std::move(coord_names)), region(std::move(box))
{
    if (region.empty())
        region = unbounded_box(dim());
    validate();
}

int Chart::index_of(std::string_view name) const
{
    for (int i = 0; i < dim(); ++i)
        if (names[i] == name)
            return i;
    return -1;
}

void Chart::validate() const
{
    if (names.empty())
        throw Error(ErrorKind::InvalidArgument, "chart needs at least one coordinate");
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != names.size())
        throw Error(ErrorKind::InvalidArgument, "coordinate names must be distinct");
    if (region.size() != names.size())
        throw Error(ErrorKind::InvalidArgument, "region dimension mismatch");
    for (const auto& iv : region)
        if (!(iv.lo < iv.hi))
            throw Error(ErrorKind::InvalidArgument, "region bounds must satisfy lo < hi");
}

bool operator==(const Chart& a, const Chart& b)
{
    if (a.names != b.names || a.region.size() != b.region.size())
        return false;
    for (size_t i = 0; i < a.region.size(); ++i)
        if (a.region[i].lo != b.region[i].lo || a.region[i].hi != b.region[i].hi)
            return false;
    return true;
}

std::vector<Point> sample_points(const Box& box, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<Point> pts;
    pts.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
        Point p(box.size());
        for (size_t i = 0; i < box.size(); ++i) {
            Interval w = box[i].window();
            // 53-bit uniform in (0,1) without relying on distribution internals.
            double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
            p[i] = w.lo + u * (w.hi - w.lo);
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

std::vector<Point> grid_points(const Box& box, int per_axis)
{
    const size_t n = box.size();
    std::vector<Point> pts;
    size_t total = 1;
    for (size_t i = 0; i < n; ++i)
        total *= static_cast<size_t>(per_axis);
    pts.reserve(total);
    std::vector<int> idx(n, 0);
    for (size_t k = 0; k < total; ++k) {
        Point p(n);
        for (size_t i = 0; i < n; ++i) {
            Interval w = box[i].window();
            p[i] = w.lo + (w.hi - w.lo) * (idx[i] + 1.0) / (per_axis + 1.0);
        }
        pts.push_back(std::move(p));
        for (size_t i = 0; i < n; ++i) {
            if (++idx[i] < per_axis)
                break;
            idx[i] = 0;
        }
    }
    return pts;
}

} // namespace hlap
