#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace hlap {

using Point = std::vector<double>;

// Open interval (lo, hi); infinite bounds allowed.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double v) const { return v > lo && v < hi; }
    bool bounded() const;
    // Finite window used for sampling: the interval itself when bounded,
    // otherwise a width-4 window anchored at the finite end (or centred at 0).
    Interval window() const;
};

using Box = std::vector<Interval>;

Box unbounded_box(int dim);
Box intersect(const Box& a, const Box& b);
bool is_empty(const Box& b);
bool contains(const Box& b, const Point& p);

struct Chart {
    std::vector<std::string> names;
    Box region;

    Chart() = default;
    Chart(std::vector<std::string> coord_names, Box box = {});

    int dim() const { return static_cast<int>(names.size()); }
    int index_of(std::string_view name) const;
    void validate() const;
};

bool operator==(const Chart& a, const Chart& b);

// Deterministic pseudo-random points inside the sampling window of a box.
std::vector<Point> sample_points(const Box& box, int count, std::uint64_t seed);

// Tensor grid with `per_axis` nodes per axis strictly inside the sampling window.
std::vector<Point> grid_points(const Box& box, int per_axis);

} // namespace hlap
