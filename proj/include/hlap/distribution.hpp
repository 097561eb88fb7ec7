#pragma once

#include "hlap/vectorcalc.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace hlap {

constexpr double kRankCutoff = 1e-9;     // relative singular value cutoff
constexpr double kMembershipTol = 1e-9;  // sampled membership residual
constexpr int kDefaultJetOrder = 3;

struct Distribution {
    Chart chart;
    std::vector<VectorField> generators;
    std::string label;

    Distribution() = default;
    Distribution(Chart c, std::vector<VectorField> gens, std::string lbl = {});
    int size() const { return static_cast<int>(generators.size()); }
    ExprMat matrix() const; // n x k, column j = generator j
};

struct LocalPresentation {
    Chart chart;
    Box base_region;
    std::vector<VectorField> anchor;
    ExprMat frame_metric; // k x k, symmetric positive definite

    LocalPresentation() = default;
    LocalPresentation(Chart c, Box region, std::vector<VectorField> anchors, ExprMat g = {});
    static LocalPresentation of(const Distribution& d);
    int rank() const { return static_cast<int>(anchor.size()); }
    ExprMat anchor_matrix() const; // n x k
    bool metric_is_identity() const;
    Distribution as_distribution() const;
};

// Numeric rank with singular value cutoff kRankCutoff * sigma_max.
int numeric_rank(const Eigen::MatrixXd& m, double rel_cutoff = kRankCutoff);
Eigen::MatrixXd evaluate_matrix(const ExprMat& m, const Point& p);
int evaluate_rank(const Distribution& d, const Point& p);

enum class MembershipMode { Auto, Symbolic, Sampled };

struct MembershipResult {
    bool member = false;
    bool certified = false;       // symbolic certificate (either verdict)
    MembershipMode mode = MembershipMode::Symbolic;
    ExprVec coefficients;         // smooth coefficients when certified member
    double residual = 0.0;        // max relative pointwise residual (sampled mode)
    std::string certificate;      // which step decided
};

// Decides X in span_{C^inf(region)}(gens). Symbolic steps: inconsistency,
// polynomial ansatz, smooth particular solution, smooth column-subset
// solution, unique non-smooth solution. Sampled step: pointwise least squares
// on a tensor grid (including the window centre) plus random points.
// Throws Error(Inconclusive) when the sampled residual lies in (tol, 10 tol).
MembershipResult module_membership(const VectorField& x, const std::vector<VectorField>& gens, const Box& region,
                                   MembershipMode mode = MembershipMode::Auto, double tol = kMembershipTol);

struct FiberReport {
    Point point;
    int dim_Dx = 0;
    int dim_fiber = 0;
    int dim_kernel = 0;
    int jet_order_used = 0;
    bool stable = true;
    int dim_fiber_next = 0;            // same computation at jet order + 1
    std::vector<int> basis_indices;    // generators whose classes form a basis of the fiber
    Eigen::MatrixXd relations;         // k x r orthonormal basis of the kernel of R^k -> fiber
};

// Never throws on instability; inspect `stable`.
FiberReport fiber_report(const Distribution& d, const Point& p, int jet_order = kDefaultJetOrder);
// Throws Error(JetUnstable) naming both answers when orders N and N+1 disagree.
FiberReport fiber_dims(const Distribution& d, const Point& p, int jet_order = kDefaultJetOrder);

// Throws Error(NoStableBasis) when the fiber analysis is unstable at p.
LocalPresentation minimal_presentation(const Distribution& d, const Point& p, int jet_order = kDefaultJetOrder);

struct TransitionResult {
    ExprMat matrix;            // src.rank x dst.rank with src.anchor = A * dst.anchor
    Box overlap;
    bool pointwise_checked = false;  // second solve applicable at x
    double pointwise_deviation = 0.0;
};

// Throws Error(NotEquivalent) when a source anchor is not a certified member
// over the overlap of the base regions (or over `region` when given).
TransitionResult transition_matrix(const LocalPresentation& src, const LocalPresentation& dst);
TransitionResult transition_matrix(const LocalPresentation& src, const LocalPresentation& dst, const Point& x);
TransitionResult transition_on(const LocalPresentation& src, const LocalPresentation& dst, const Box& region);

struct EquivalenceWitness {
    LocalPresentation witness;
    ExprMat proj_a;  // witness rank x a.rank: anchor_W = proj_a * anchor_a
    ExprMat proj_b;  // witness rank x b.rank
    double commutativity_residual = 0.0;
};

EquivalenceWitness pullback_equivalence(const LocalPresentation& a, const LocalPresentation& b, const Point& x,
                                        const Distribution& d);

// Half-open boxes around p, one per orthant, clipped to `region`, narrower
// than the distance from p to any breakpoint not passing through p.
std::vector<std::pair<std::vector<int>, Box>> sector_boxes(const Point& p, const Box& region,
                                                           const std::vector<std::vector<double>>& cuts);

} // namespace hlap
