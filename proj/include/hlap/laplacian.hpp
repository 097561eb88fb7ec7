#pragma once

#include "hlap/metric.hpp"
#include "hlap/quadrature.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace hlap {

// A section of E*_U written in the dual frame of a presentation.
struct DualSection {
    LocalPresentation presentation;
    ExprVec realization; // length = presentation.rank()
};

// realization_a = X_a u
DualSection horizontal_differential(const Expr& u, const LocalPresentation& p);
// realization_a = <omega, X_a>
DualSection realize_dual(const OneForm& omega, const LocalPresentation& p);
// d* omega = sum_a (-X_a - div X_a) (G^-1 realization)_a
Expr adjoint_differential(const DualSection& omega, const Density& mu);

// A realization represents a smooth section when every product
// realization_a * X_a^i is smooth on the region (flat anchor components may
// absorb singular realization entries).
SmoothVerdict dual_section_smooth(const DualSection& omega, const Box& region);

struct HorizontalLaplacian {
    LocalPresentation presentation;
    Density density;
    bool factored = false;                 // orthonormal frame available
    std::vector<VectorField> frame;        // X~_b = sum_a X_a L_ab, L L^T = G^-1
    std::vector<std::pair<DiffOperator, DiffOperator>> pairs; // (X~_b*, X~_b)
    DiffOperator op;                       // expanded operator
};

// Sum of squares over the orthonormalized frame. With a frame metric whose
// inverse has no symbolic Cholesky factor, throws Error(NonSymbolicCholesky)
// unless `allow_divergence_form`, in which case the operator is built from
// the cometric in divergence form and `factored` is false.
HorizontalLaplacian horizontal_laplacian(const LocalPresentation& p, const Density& mu,
                                         bool allow_divergence_form = false);

// -(1/m) sum_ij d_i (m g^ij d_j .)
DiffOperator divergence_form_laplacian(const Cometric& g, const Density& mu);
// sum_ab X_a* o (G^-1)_ab o X_b, the composition d* o d.
DiffOperator composed_laplacian(const LocalPresentation& p, const Density& mu);

// Degree-2 polynomial in formal covector symbols xi_1..xi_n, stored over an
// extended chart whose coordinates n..2n-1 are the xi.
enum class SymbolFlavor { Manifold, Longitudinal };

struct SymbolFn {
    Chart chart;          // extended chart (x..., xi...)
    int base_dim = 0;
    Expr expr;
    SymbolFlavor flavor = SymbolFlavor::Manifold;
};

Chart symbol_chart(const Chart& base);
// sum_b <X~_b, xi>^2, or the cometric quadratic form when no frame exists.
SymbolFn principal_symbol(const HorizontalLaplacian& h);
// Second route: minus the top-order part of the operator with d_i -> xi_i.
SymbolFn operator_symbol(const DiffOperator& p);
// (1/2) d^2 sigma / d xi_i d xi_j
ExprMat symbol_matrix(const SymbolFn& s);

// |iota* xi|^2 on D*_p for xi given on the classes of F's generators.
// F's generator list must contain every anchor field of the presentation;
// xi must annihilate the relations of F at p.
double longitudinal_symbol(const HorizontalLaplacian& h, const Distribution& f, const Point& p,
                           const std::vector<double>& xi, int jet_order = kDefaultJetOrder);

struct QuadratureCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

// For w = u * bump(box): lhs = int (Delta w) w dmu, rhs = int sum_ab (X_a w) G^ab (X_b w) dmu.
QuadratureCheck dirichlet_form_check(const HorizontalLaplacian& h, const Expr& u, const Box& box,
                                     int points = kQuadraturePoints);
// lhs = int (Delta w1) w2 dmu, rhs = int w1 (Delta w2) dmu for w_i = u_i * bump(box).
QuadratureCheck symmetry_check(const HorizontalLaplacian& h, const Expr& u1, const Expr& u2, const Box& box,
                               int points = kQuadraturePoints);

struct PartitionOfUnity {
    std::vector<std::pair<Box, Expr>> parts;
};

PartitionOfUnity trivial_partition(const Box& box);
// Rational partition along the listed axes: with t the affine map of the box
// axis onto [-1, 1], phi_1 = (1 - t^2)/(1 + t^2) and phi_2 = 2t/(1 + t^2);
// products over axes, so sum phi^2 = 1 exactly. Supports are the whole box.
PartitionOfUnity rational_partition(const Box& box, const std::vector<int>& axes);
// Max of |sum phi^2 - 1| at sample points; zero when canonically one.
double partition_defect(const PartitionOfUnity& pu);

struct ImsResult {
    DiffOperator residual;                      // Delta - sum phi Delta phi - 1/2 sum [[Delta, phi], phi]
    std::vector<DiffOperator> double_commutators;
    bool remainders_order_zero = true;
};

// Throws Error(SupportViolation) when a part's box leaves the base region.
ImsResult ims_localization_check(const HorizontalLaplacian& h, const PartitionOfUnity& pu);

// sum_alpha phi_alpha Delta_alpha phi_alpha + 1/2 [[Delta_alpha, phi_alpha], phi_alpha]
// after checking that the patch operators agree canonically on overlaps.
// Throws Error(NotEquivalent) otherwise.
DiffOperator assemble_global(const std::vector<HorizontalLaplacian>& patches, const PartitionOfUnity& pu);

struct EstimateProbe {
    double max_ratio = 0.0;
    int trials = 0;
};

// max over seeded trial functions (random quadratic polynomial times bump) of
// |Xu|^2 / ((Delta u, u) + |u|^2). Throws Error(InvalidArgument) unless X is a
// certified member of the presentation's module on its base region.
EstimateProbe x_estimate_probe(const VectorField& x, const HorizontalLaplacian& h, const Box& box, int trials,
                               std::uint64_t seed, int points = 32);

} // namespace hlap
