#pragma once

#include "hlap/distribution.hpp"

#include <Eigen/Dense>

#include <vector>

namespace hlap {

// g* = R G^-1 R^T for anchor matrix R and frame metric G.
struct Cometric {
    Chart chart;
    ExprMat matrix; // n x n, symmetric
};

Cometric induced_cometric(const LocalPresentation& p);

// Rank of g*(p) measured through its factor R(p) L(p), L L^T = G^-1(p), so the
// shared singular value cutoff applies at the scale of the anchor fields.
int cometric_rank(const LocalPresentation& pres, const Point& p);

// Quotient norm of the fiber class of sum_j coeffs_j sigma_j at p:
// min |w|_G over w in coeffs + relations, relations from the fiber analysis.
// Throws Error(JetUnstable) when the fiber analysis is unstable at p.
double fiber_norm(const LocalPresentation& pres, const Point& p, const std::vector<double>& coeffs,
                  int jet_order = kDefaultJetOrder);

struct FiberMetricProbe {
    Point point;
    std::vector<int> basis_indices;
    Eigen::MatrixXd gram; // inner products of the basis classes, symmetric positive definite
};

FiberMetricProbe fiber_metric_probe(const LocalPresentation& pres, const Point& p, int jet_order = kDefaultJetOrder);

struct PullbackMetric {
    ExprMat metric;                  // k x k
    double isometry_residual = 0.0;  // max |<A*u, A*v>_src - <u, v>_dst| over 16 points
};

// A is k x l (rows indexed by the target frame), G_src is l x l. Returns the
// unique G_dst with G_dst^-1 = A G_src^-1 A^T, for which the adjoint
// A* u = G_src^-1 A^T G_dst u is an isometry. Throws Error(RankDeficient)
// when A lacks full row rank on `region`.
PullbackMetric pullback_metric_along_submersion(const ExprMat& a, const ExprMat& g_src, const Box& region);

} // namespace hlap
