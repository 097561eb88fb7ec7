#pragma once

#include "hlap/laplacian.hpp"

#include <string>
#include <vector>

namespace hlap {

// f : src -> dst with a user-supplied inverse. forward is written in src
// coordinates, inverse in dst coordinates.
struct Diffeo {
    Chart src;
    Chart dst;
    ExprVec forward;
    ExprVec inverse;
    ExprMat jacobian; // d forward_i / d x_j, in src coordinates

    // Throws Error(InvalidArgument) unless both compositions are the identity
    // (canonically or within 1e-10 at sampled points) and det J is nonzero at
    // 32 sample points.
    static Diffeo make(const Chart& src, const Chart& dst, ExprVec forward, ExprVec inverse);
    static Diffeo identity(const Chart& c);
    Diffeo inverted() const;
};

// f o g: first g, then f.
Diffeo compose(const Diffeo& f, const Diffeo& g);

// u o f, a function on src.
Expr pull_function(const Diffeo& f, const Expr& u);
// (f_* X)(y) = J(f^-1(y)) X(f^-1(y)).
VectorField pushforward(const Diffeo& f, const VectorField& x);

struct PreservationResult {
    bool preserved = true;
    std::vector<MembershipResult> forward;  // f_* X_a in D'
    std::vector<MembershipResult> backward; // f^-1_* X'_b in D
    std::string witness;                    // first failing field
};

// Every pushed generator a certified member of D' and every pulled-back
// generator of D' a certified member of D.
PreservationResult check_distribution_preserved(const Diffeo& f, const Distribution& d, const Distribution& d_prime);

struct IsometryResult {
    bool isometry = false;
    bool preserved = false;
    EqualityCriterion criterion = EqualityCriterion::Mismatch;
    double cometric_defect = 0.0;   // max |g'*(f(x)) - J g*(x) J^T| at samples
    double fiber_norm_defect = 0.0; // max over spot checks
    int fiber_checks = 0;
};

// Compares g'* o f with J g* J^T and spot-checks fiber norms of pushed
// classes at 16 points.
IsometryResult check_isometry(const Diffeo& f, const LocalPresentation& p, const LocalPresentation& p_prime);

// Weight of the pulled-back density: m'(f(x)) |det J(x)|.
Expr pullback_density_weight(const Diffeo& f, const Density& mu_prime);

// f^* o P' o (f^-1)^*, an operator on src recovered from its action on monomials.
DiffOperator conjugate_operator(const Diffeo& f, const DiffOperator& p_prime);

struct CommutationResult {
    DiffOperator residual;      // f^* P' (f^-1)^* - P
    int corpus_size = 0;
    int corpus_nonzero = 0;     // functions u' with f^*(P' u') != P(f^* u')
    double density_defect = 0.0;
};

// Throws Error(DensityMismatch) when mu differs from the pullback of mu'
// beyond 1e-10 (relative) at sampled points.
CommutationResult check_laplacian_commutation(const Diffeo& f, const DiffOperator& lap, const DiffOperator& lap_prime,
                                              const Density& mu, const Density& mu_prime);

} // namespace hlap
