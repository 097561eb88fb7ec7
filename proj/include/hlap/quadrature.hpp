#pragma once

#include "hlap/expr.hpp"

#include <functional>
#include <vector>

namespace hlap {

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

GaussRule gauss_legendre(int n);

constexpr int kQuadraturePoints = 64;

// Tensor Gauss-Legendre integral over a bounded box.
double integrate(const std::function<double(const Point&)>& f, const Box& box, int points_per_axis = kQuadraturePoints);
double integrate(const Expr& e, const Box& box, int points_per_axis = kQuadraturePoints);

// Product of (1 - t_i^2)^4 with t_i the affine map of box axis i onto [-1, 1].
// Vanishes to order 4 on the boundary, so integrations by parts on the box
// produce no boundary terms for operators of order <= 2.
Expr bump(const Box& box);
// The axis-i factor of bump(box), a polynomial in x_i alone.
Expr bump_factor(const Box& box, int axis);

} // namespace hlap
