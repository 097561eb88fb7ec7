#pragma once

#include "hlap/laplacian.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hlap {

enum class Boundary { Dirichlet, Periodic };

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 4;
    Boundary bc = Boundary::Dirichlet;
    double h = 0.0;

    // Dirichlet: interior nodes lo + (i+1) h, h = (hi - lo)/(n+1).
    // Periodic: nodes lo + i h, h = (hi - lo)/n.
    double node(int i) const;
};

struct Grid {
    std::vector<GridAxis> axes; // axis 0 varies slowest in the flat index

    // Throws Error(InvalidArgument) for fewer than 4 nodes on an axis or an unbounded box.
    static Grid make(const Box& box, const std::vector<int>& n, const std::vector<Boundary>& bc);
    int dim() const { return static_cast<int>(axes.size()); }
    long size() const;
    std::vector<int> multi_index(long flat) const;
    long flat_index(const std::vector<int>& idx) const;
    Point node(long flat) const;
    double cell_volume() const;
};

struct GridOperator {
    Grid grid;
    Eigen::SparseMatrix<double> stiffness; // K, exactly symmetric
    Eigen::VectorXd weights;               // density samples times cell volume
    Eigen::SparseMatrix<double> matrix;    // A = W^-1 K
    std::vector<Eigen::SparseMatrix<double>> forward;  // D+ per frame field
    std::vector<Eigen::SparseMatrix<double>> backward; // D- per frame field
    std::vector<std::string> provenance;               // discretized fields
};

// Each field X = sum_i a_i d_i becomes the one-sided difference pair
// (D+ u)_p = sum_i a_i(x_p) (u_(p+e_i) - u_p)/h_i and its backward twin;
// K = 1/2 sum_b (D+_b^T W D+_b + D-_b^T W D-_b). The average is second-order
// consistent and K is assembled entry by entry so K = K^T exactly.
// Throws Error(CoefficientSingularOnGrid) when a coefficient or the density is
// not finite (or the density not positive) at a node, and
// Error(InvalidArgument) when a periodic axis carries non-periodic data.
GridOperator discretize(const std::vector<VectorField>& frame, const Density& mu, const Grid& grid);
// Uses the orthonormalized frame; throws Error(InvalidArgument) without one.
GridOperator discretize(const HorizontalLaplacian& h, const Grid& grid);

// max |A_ij w_i - A_ji w_j| over stored entries.
double weighted_symmetry_check(const GridOperator& a);

// |u^T W A u - 1/2 sum_b (|W^1/2 D+_b u|^2 + |W^1/2 D-_b u|^2)| relative to the right side.
double dirichlet_identity_defect(const GridOperator& a, const Eigen::VectorXd& u);

Eigen::VectorXd sample_on_grid(const Expr& e, const Grid& grid);

struct Spectrum {
    std::vector<double> eigenvalues;   // nondecreasing
    std::vector<double> residuals;     // |K v - lambda W v| / |W v|
    std::string method;
    int iterations = 0;
};

// Smallest `count` eigenvalues of K v = lambda W v. Dense for dimension up to
// kDenseLimit; otherwise shift-invert block subspace iteration from a seeded
// start block. Throws Error(InvalidArgument) when count > dim/4 and
// Error(NoConvergence) when residuals stay above 1e-8 after the iteration cap.
constexpr long kDenseLimit = 1500;
Spectrum low_spectrum(const GridOperator& a, int count, std::uint64_t seed = 0x5eedULL);

// exp(-t A) u0 by a Lanczos approximation in the W inner product.
Eigen::VectorXd heat_flow(const GridOperator& a, const Eigen::VectorXd& u0, double t);

// Unit mass at the node nearest p: value 1 / w_p.
Eigen::VectorXd grid_delta(const GridOperator& a, const Point& p);
// Indicator of x_axis > cut.
Eigen::VectorXd grid_step(const Grid& grid, int axis, double cut);

struct ProbeCurve {
    std::vector<double> times;
    // tail[t][a]: high-frequency energy of the marginal along axis a, the
    // marginal being the W-weighted sum over the other axes. Sine transform on
    // Dirichlet axes (modes k >= n/2), Fourier transform on periodic axes
    // (|k| >= n/4).
    std::vector<std::vector<double>> tail;
    std::vector<double> initial_tail;
    std::string indicator = "marginal spectral tail energy (diagnostic proxy)";
};

// Throws Error(InvalidArgument) unless every time is positive.
ProbeCurve smoothing_probe(const GridOperator& a, const std::vector<double>& times, const Eigen::VectorXd& u0);
std::vector<double> marginal_tail_energy(const Grid& grid, const Eigen::VectorXd& weights, const Eigen::VectorXd& u);

struct ConsistencyResult {
    std::vector<int> nodes_per_axis;  // n for each refinement
    std::vector<double> errors;       // max error on the shared inner nodes
    std::vector<double> orders;       // log2 of successive error ratios
    double min_order() const;
};

// Applies the discretization to samples of u and compares with samples of the
// symbolic Delta u at nodes shared by all Dirichlet grids with n + 1 in
// `intervals`, restricted to the middle half of the box.
ConsistencyResult consistency_check(const HorizontalLaplacian& h, const Expr& u, const Box& box,
                                    const std::vector<int>& intervals = {16, 32, 64});

// Coordinate triplets, 1-based, one "i j value" line per stored entry of K.
void write_triplets(std::ostream& os, const Eigen::SparseMatrix<double>& m);

} // namespace hlap
