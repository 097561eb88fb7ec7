#include "hlap/metric.hpp"

#include "hlap/error.hpp"

#include <algorithm>
#include <cmath>

namespace hlap {

namespace {

ExprMat metric_inverse(const LocalPresentation& p)
{
    if (p.metric_is_identity())
        return identity_matrix(p.rank());
    return inverse(p.frame_metric, p.base_region);
}

// Component of c that is G-orthogonal to the relation space.
Eigen::VectorXd quotient_representative(const Eigen::MatrixXd& g, const Eigen::MatrixXd& rel, const Eigen::VectorXd& c)
{
    if (rel.cols() == 0)
        return c;
    Eigen::MatrixXd kgk = rel.transpose() * g * rel;
    return c - rel * kgk.ldlt().solve(rel.transpose() * g * c);
}

} // namespace

Cometric induced_cometric(const LocalPresentation& p)
{
    ExprMat r = p.anchor_matrix();
    ExprMat gi = metric_inverse(p);
    return Cometric{p.chart, matmul(matmul(r, gi), transpose(r))};
}

int cometric_rank(const LocalPresentation& pres, const Point& p)
{
    Eigen::MatrixXd r = evaluate_matrix(pres.anchor_matrix(), p);
    if (pres.metric_is_identity())
        return numeric_rank(r);
    Eigen::MatrixXd gi = evaluate_matrix(pres.frame_metric, p).inverse();
    Eigen::MatrixXd l = gi.llt().matrixL();
    return numeric_rank(r * l);
}

double fiber_norm(const LocalPresentation& pres, const Point& p, const std::vector<double>& coeffs, int jet_order)
{
    if (static_cast<int>(coeffs.size()) != pres.rank())
        throw Error(ErrorKind::InvalidArgument, "coefficient vector length differs from the rank");
    FiberReport rep = fiber_dims(pres.as_distribution(), p, jet_order);
    Eigen::MatrixXd g = evaluate_matrix(pres.frame_metric, p);
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    Eigen::VectorXd w = quotient_representative(g, rep.relations, c);
    return std::sqrt(std::max(0.0, w.dot(g * w)));
}

FiberMetricProbe fiber_metric_probe(const LocalPresentation& pres, const Point& p, int jet_order)
{
    FiberReport rep = fiber_dims(pres.as_distribution(), p, jet_order);
    Eigen::MatrixXd g = evaluate_matrix(pres.frame_metric, p);
    const Eigen::Index m = static_cast<Eigen::Index>(rep.basis_indices.size());
    Eigen::MatrixXd w(pres.rank(), m);
    for (Eigen::Index j = 0; j < m; ++j)
        w.col(j) = quotient_representative(g, rep.relations,
                                           Eigen::VectorXd::Unit(pres.rank(), rep.basis_indices[static_cast<size_t>(j)]));
    FiberMetricProbe out;
    out.point = p;
    out.basis_indices = rep.basis_indices;
    out.gram = w.transpose() * g * w;
    return out;
}

PullbackMetric pullback_metric_along_submersion(const ExprMat& a, const ExprMat& g_src, const Box& region)
{
    if (a.empty() || a[0].size() != g_src.size())
        throw Error(ErrorKind::InvalidArgument, "transition matrix and source metric sizes differ");
    ExprMat gsi = inverse(g_src, region);
    ExprMat gdi = matmul(matmul(a, gsi), transpose(a));
    PullbackMetric out;
    out.metric = inverse(gdi, region);
    // Adjoint isometry at sample points against random covectors u, v.
    for (const auto& p : sample_points(region, 16, 0x70626d65ULL)) {
        Eigen::MatrixXd an = evaluate_matrix(a, p);
        Eigen::MatrixXd gs = evaluate_matrix(g_src, p);
        Eigen::MatrixXd gd = evaluate_matrix(out.metric, p);
        Eigen::MatrixXd adj = gs.inverse() * an.transpose() * gd;
        const Eigen::Index k = gd.rows();
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j) {
                Eigen::VectorXd u = Eigen::VectorXd::Unit(k, i), v = Eigen::VectorXd::Unit(k, j);
                double lhs = (adj * u).dot(gs * (adj * v));
                out.isometry_residual = std::max(out.isometry_residual, std::fabs(lhs - u.dot(gd * v)));
            }
    }
    return out;
}

} // namespace hlap
