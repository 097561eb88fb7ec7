#include "hlap/report.hpp"

#include "hlap/error.hpp"
#include "hlap/isometry.hpp"
#include "hlap/foliated_forms.hpp"

#include <Eigen/Core>
#include <fftw3.h>
#include <gmp.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

namespace hlap {

namespace {

constexpr const char* kVersion = "0.1.0";

// Thrown when an input product of an analysis failed upstream.
struct Skipped {
    std::string reason;
};

Json number(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return nullptr;
    return v;
}

Json point_json(const Point& p)
{
    Json a = Json::array();
    for (double v : p)
        a.push_back(number(v));
    return a;
}

Json box_json(const Box& b)
{
    Json a = Json::array();
    for (const auto& iv : b)
        a.push_back(Json::array({number(iv.lo), number(iv.hi)}));
    return a;
}

Json field_json(const VectorField& x)
{
    Json a = Json::array();
    for (const auto& c : x.coeffs)
        a.push_back(to_string(c, x.chart));
    return a;
}

Json fields_json(const std::vector<VectorField>& v)
{
    Json a = Json::array();
    for (const auto& x : v)
        a.push_back(field_json(x));
    return a;
}

Json matrix_json(const ExprMat& m, const Chart& c)
{
    Json a = Json::array();
    for (const auto& row : m) {
        Json r = Json::array();
        for (const auto& e : row)
            r.push_back(to_string(e, c));
        a.push_back(r);
    }
    return a;
}

Json operator_json(const DiffOperator& p)
{
    Json o = Json::object();
    for (const auto& [alpha, c] : p.terms)
        o[operator_key(alpha, p.chart)] = to_string(c, p.chart);
    return o;
}

Json doubles(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v)
        a.push_back(number(x));
    return a;
}

bool same_matrix(const ExprMat& a, const ExprMat& b)
{
    if (a.size() != b.size())
        return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size())
            return false;
        for (size_t j = 0; j < a[i].size(); ++j)
            if (!identical(a[i][j], b[i][j]))
                return false;
    }
    return true;
}

// Lazily computed shared products; a failure is recorded once and turns every
// dependent analysis into a skip.
template <class T>
struct Product {
    std::optional<T> value;
    std::string failure;
    bool tried = false;

    const T& get(const std::string& name, const std::function<T()>& make)
    {
        if (!tried) {
            tried = true;
            try {
                value = make();
            } catch (const Error& e) {
                failure = e.what();
            } catch (const Skipped& s) {
                failure = s.reason;
            }
        }
        if (!value)
            throw Skipped{name + " failed: " + failure};
        return *value;
    }
};

class Runner {
public:
    explicit Runner(const Job& job) : job_(job), cfg_(job.config) {}

    Json run(const std::string& name, Report& r)
    {
        try {
            Json out = dispatch(name, r);
            out["status"] = "ok";
            return out;
        } catch (const Error& e) {
            return {{"status", "error"}, {"kind", error_kind_name(e.kind())}, {"message", e.what()}};
        } catch (const Skipped& s) {
            return {{"status", "skipped"}, {"reason", s.reason}};
        }
    }

private:
    const Job& job_;
    const JobConfig& cfg_;
    Product<LocalPresentation> presentation_;
    Product<HorizontalLaplacian> laplacian_;
    Product<GridOperator> grid_op_;

    double tol(const std::string& k) const { return cfg_.tolerances.at(k); }

    Point origin() const { return Point(static_cast<size_t>(job_.chart.dim()), 0.0); }

    std::vector<Point> points() const { return cfg_.points.empty() ? std::vector<Point>{origin()} : cfg_.points; }

    const LocalPresentation& presentation()
    {
        return presentation_.get("presentation", [&] {
            if (cfg_.presentation.mode == "generators")
                return LocalPresentation::of(job_.primary());
            Point p = cfg_.presentation.base_point.empty() ? origin() : cfg_.presentation.base_point;
            return minimal_presentation(job_.primary(), p, cfg_.jet_order);
        });
    }

    const HorizontalLaplacian& laplacian()
    {
        return laplacian_.get("laplacian", [&] { return horizontal_laplacian(presentation(), job_.density, true); });
    }

    const GridOperator& grid_operator()
    {
        return grid_op_.get("discretize", [&] {
            Grid g = Grid::make(cfg_.box, cfg_.grid->n, cfg_.grid->boundary);
            return discretize(laplacian(), g);
        });
    }

    Json dispatch(const std::string& name, Report& r)
    {
        if (name == "fibers")
            return fibers();
        if (name == "presentation")
            return presentation_json();
        if (name == "metric")
            return metric();
        if (name == "laplacian")
            return laplacian_json();
        if (name == "symbol")
            return symbol();
        if (name == "ims")
            return ims();
        if (name == "hull")
            return hull();
        if (name == "derham")
            return derham();
        if (name == "isometry")
            return isometry();
        if (name == "discretize")
            return discretize_json(r);
        if (name == "spectrum")
            return spectrum();
        if (name == "probe")
            return probe();
        if (name == "consistency")
            return consistency();
        throw Error(ErrorKind::UnknownAnalysis, "'" + name + "'");
    }

    Json fibers()
    {
        Json pts = Json::array();
        for (const auto& p : points()) {
            FiberReport f = fiber_report(job_.primary(), p, cfg_.jet_order);
            pts.push_back({{"point", point_json(p)},
                           {"dims", {f.dim_fiber, f.dim_Dx, f.dim_kernel}},
                           {"stable", f.stable},
                           {"jet_order", f.jet_order_used},
                           {"dim_fiber_next", f.dim_fiber_next},
                           {"basis_indices", f.basis_indices}});
        }
        return {{"points", pts}, {"dims_order", "fiber, image, kernel"}};
    }

    Json presentation_json()
    {
        const LocalPresentation& p = presentation();
        Json o{{"mode", cfg_.presentation.mode},
               {"rank", p.rank()},
               {"base_region", box_json(p.base_region)},
               {"anchors", fields_json(p.anchor)},
               {"frame_metric", matrix_json(p.frame_metric, p.chart)}};
        if (cfg_.presentation.mode == "minimal")
            o["base_point"] = point_json(cfg_.presentation.base_point.empty() ? origin() : cfg_.presentation.base_point);
        return o;
    }

    Json metric()
    {
        const LocalPresentation& p = presentation();
        Cometric g = induced_cometric(p);
        Json ranks = Json::array();
        for (const auto& x : points())
            if (contains(p.base_region, x))
                ranks.push_back({{"point", point_json(x)}, {"rank", cometric_rank(p, x)}});
        return {{"cometric", matrix_json(g.matrix, g.chart)}, {"rank_at_points", ranks}};
    }

    Json laplacian_json()
    {
        const HorizontalLaplacian& h = laplacian();
        Cometric g = induced_cometric(h.presentation);
        return {{"factored", h.factored},
                {"density", to_string(job_.density.weight, job_.chart)},
                {"operator", operator_json(h.op)},
                {"operator_string", to_string(h.op)},
                {"frame", fields_json(h.frame)},
                {"divergence_form_match", identical(h.op, divergence_form_laplacian(g, job_.density))},
                {"composed_match", identical(h.op, composed_laplacian(h.presentation, job_.density))}};
    }

    Json symbol()
    {
        const HorizontalLaplacian& h = laplacian();
        SymbolFn s = principal_symbol(h);
        ExprMat m = symbol_matrix(s);
        ExprMat from_op = symbol_matrix(operator_symbol(h.op));
        return {{"principal_symbol", to_string(s.expr, s.chart)},
                {"symbol_matrix", matrix_json(m, job_.chart)},
                {"matches_cometric", same_matrix(m, induced_cometric(h.presentation).matrix)},
                {"routes_agree", same_matrix(m, from_op)}};
    }

    Json ims()
    {
        const HorizontalLaplacian& h = laplacian();
        std::vector<int> axes = cfg_.partition_axes;
        if (axes.empty())
            for (int i = 0; i < job_.chart.dim(); ++i)
                axes.push_back(i);
        PartitionOfUnity pu = rational_partition(cfg_.box, axes);
        ImsResult res = ims_localization_check(h, pu);
        return {{"parts", pu.parts.size()},
                {"partition_defect", number(partition_defect(pu))},
                {"residual_zero", res.residual.is_zero()},
                {"remainders_order_zero", res.remainders_order_zero}};
    }

    Json hull()
    {
        HullReport h = hull_generate(job_.primary(), cfg_.hull_depth);
        Json fields = Json::array(), uncertified = Json::array(), max_rank = Json::array(), min_rank = Json::array();
        for (const auto& v : h.new_fields_per_depth)
            fields.push_back(fields_json(v));
        for (const auto& v : h.uncertified_per_depth)
            uncertified.push_back(fields_json(v));
        for (const auto& ranks : h.rank_by_depth) {
            max_rank.push_back(*std::max_element(ranks.begin(), ranks.end()));
            min_rank.push_back(*std::min_element(ranks.begin(), ranks.end()));
        }
        return {{"depth", h.depth},
                {"new_fields", fields},
                {"uncertified", uncertified},
                {"grid_points", h.grid.size()},
                {"max_rank_per_depth", max_rank},
                {"min_rank_per_depth", min_rank},
                {"pole_order_per_depth", h.pole_order_per_depth},
                {"bracket_generating", h.bracket_generating},
                {"membership_closed", h.membership_closed},
                {"suspicious_growth", h.suspicious_growth}};
    }

    Json derham()
    {
        StructureCoefficients sc = structure_coefficients(job_.primary());
        LocalPresentation p = LocalPresentation::of(job_.primary());
        const int k_max = std::min(2, sc.rank - 2);
        if (k_max < 0)
            throw Error(ErrorKind::DegreeOverflow, "the complex check needs rank >= 2");
        ComplexReport rep = d_squared_check(p, sc, k_max);
        HodgeLaplacian h0 = hodge_laplacian(0, p, sc, job_.density);
        DiffOperator lap = horizontal_laplacian(p, job_.density).op;
        Json table = Json::array();
        for (int i = 0; i < sc.rank; ++i)
            for (int j = i + 1; j < sc.rank; ++j)
                for (int k = 0; k < sc.rank; ++k)
                    if (!sc.c(k, i, j).is_zero())
                        table.push_back({{"i", i + 1}, {"j", j + 1}, {"k", k + 1}, {"c", to_string(sc.c(k, i, j), job_.chart)}});
        std::vector<bool> dd = rep.d_squared_zero;
        return {{"k_max", k_max},
                {"structure_coefficients", table},
                {"structure_residual", number(sc.residual)},
                {"gauge", rep.gauge},
                {"d_squared_zero", dd},
                {"corpus_failures", rep.corpus_failures},
                {"naturality_failures", rep.naturality_failures},
                {"realization_constrained", rep.realization_constrained},
                {"hodge0_matches_laplacian", identical(h0.op.entries[0][0], lap)}};
    }

    Json isometry()
    {
        const IsometrySpec& s = *cfg_.isometry;
        ExprVec fwd, inv;
        for (const auto& e : s.forward)
            fwd.push_back(parse_expr(e, job_.chart));
        for (const auto& e : s.inverse)
            inv.push_back(parse_expr(e, job_.chart));
        Diffeo f = Diffeo::make(job_.chart, job_.chart, fwd, inv);
        const Distribution& target = s.target.empty() ? job_.primary() : job_.distribution(s.target);
        LocalPresentation p = LocalPresentation::of(job_.primary()), pp = LocalPresentation::of(target);
        IsometryResult ir = check_isometry(f, p, pp);
        Json o{{"target", target.label},
               {"preserved", ir.preserved},
               {"isometry", ir.isometry},
               {"criterion", ir.criterion == EqualityCriterion::Canonical ? "canonical"
                             : ir.criterion == EqualityCriterion::Sampled  ? "sampled"
                                                                            : "mismatch"},
               {"cometric_defect", number(ir.cometric_defect)},
               {"fiber_norm_defect", number(ir.fiber_norm_defect)},
               {"fiber_checks", ir.fiber_checks}};
        if (!ir.preserved) {
            o["witness"] = check_distribution_preserved(f, job_.primary(), target).witness;
            return o;
        }
        try {
            CommutationResult c = check_laplacian_commutation(f, horizontal_laplacian(p, job_.density).op,
                                                              horizontal_laplacian(pp, job_.density).op, job_.density,
                                                              job_.density);
            o["commutation"] = {{"residual_zero", c.residual.is_zero()},
                                {"residual", operator_json(c.residual)},
                                {"corpus_size", c.corpus_size},
                                {"corpus_nonzero", c.corpus_nonzero}};
        } catch (const Error& e) {
            o["commutation"] = {{"status", "error"}, {"kind", error_kind_name(e.kind())}, {"message", e.what()}};
        }
        return o;
    }

    Json discretize_json(Report& r)
    {
        const GridOperator& a = grid_operator();
        Eigen::SparseMatrix<double> kt = a.stiffness.transpose();
        bool exact = (a.stiffness - kt).norm() == 0.0;
        std::mt19937_64 rng(cfg_.seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Eigen::VectorXd u(a.grid.size());
        for (long i = 0; i < u.size(); ++i)
            u[i] = unif(rng);
        double sym = weighted_symmetry_check(a), dir = dirichlet_identity_defect(a, u);
        r.stiffness.push_back(a.stiffness);
        Json n = Json::array(), bc = Json::array();
        for (const auto& ax : a.grid.axes) {
            n.push_back(ax.n);
            bc.push_back(ax.bc == Boundary::Dirichlet ? "dirichlet" : "periodic");
        }
        return {{"nodes_per_axis", n},
                {"boundary", bc},
                {"dimension", a.grid.size()},
                {"nonzeros", a.stiffness.nonZeros()},
                {"exact_symmetric", exact},
                {"weighted_symmetry", number(sym)},
                {"weighted_symmetric", sym < tol("weighted_symmetry")},
                {"dirichlet_identity_defect", number(dir)},
                {"dirichlet_identity_ok", dir < tol("dirichlet_identity")},
                {"provenance", a.provenance}};
    }

    Json spectrum()
    {
        const GridOperator& a = grid_operator();
        const int count = std::max(1, static_cast<int>(std::min<long>(cfg_.spectrum_count, a.grid.size() / 4)));
        Spectrum s = low_spectrum(a, count, cfg_.seed);
        double worst = *std::max_element(s.residuals.begin(), s.residuals.end());
        return {{"count", count},
                {"eigenvalues", doubles(s.eigenvalues)},
                {"residuals", doubles(s.residuals)},
                {"method", s.method},
                {"iterations", s.iterations},
                {"nonnegative", s.eigenvalues.front() >= tol("spectrum_floor")},
                {"residuals_ok", worst < tol("eigen_residual")}};
    }

    Json probe()
    {
        const GridOperator& a = grid_operator();
        Point src = cfg_.probe_source;
        if (src.empty())
            for (const auto& iv : cfg_.box)
                src.push_back(0.5 * (iv.lo + iv.hi));
        ProbeCurve c = smoothing_probe(a, cfg_.probe_times, grid_delta(a, src));
        Json tails = Json::array(), ratio = Json::array(), decayed = Json::array();
        for (const auto& t : c.tail)
            tails.push_back(doubles(t));
        for (size_t i = 0; i < c.initial_tail.size(); ++i) {
            double q = c.tail.back()[i] / c.initial_tail[i];
            ratio.push_back(number(q));
            decayed.push_back(q < tol("probe_decay"));
        }
        return {{"indicator", c.indicator},
                {"source", point_json(src)},
                {"times", doubles(c.times)},
                {"initial_tail", doubles(c.initial_tail)},
                {"tail", tails},
                {"final_ratio", ratio},
                {"decayed", decayed}};
    }

    Json consistency()
    {
        Expr u = parse_expr(cfg_.consistency_function, job_.chart);
        ConsistencyResult c = consistency_check(laplacian(), u, cfg_.box);
        return {{"function", to_string(u, job_.chart)},
                {"nodes_per_axis", c.nodes_per_axis},
                {"errors", doubles(c.errors)},
                {"orders", doubles(c.orders)},
                {"min_order", number(c.min_order())},
                {"second_order", c.min_order() >= tol("consistency_order")}};
    }
};

std::string eigen_version()
{
    return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
           std::to_string(EIGEN_MINOR_VERSION);
}

bool close_values(const Json& a, const Json& b, double tol)
{
    if (a.is_number() && b.is_number())
        return std::abs(a.get<double>() - b.get<double>()) <= tol;
    if (a.is_array() && b.is_array()) {
        if (a.size() != b.size())
            return false;
        for (size_t i = 0; i < a.size(); ++i)
            if (!close_values(a[i], b[i], tol))
                return false;
        return true;
    }
    if (a.is_object() && b.is_object()) {
        if (a.size() != b.size())
            return false;
        for (auto it = a.begin(); it != a.end(); ++it)
            if (!b.contains(it.key()) || !close_values(it.value(), b[it.key()], tol))
                return false;
        return true;
    }
    return a == b;
}

} // namespace

Report run_job(const Job& job)
{
    Report r;
    Runner runner(job);
    Json analyses = Json::object();
    for (const auto& name : known_analyses())
        if (std::find(job.config.analyses.begin(), job.config.analyses.end(), name) != job.config.analyses.end()) {
            analyses[name] = runner.run(name, r);
            if (analyses[name]["status"] != "ok")
                r.failed = true;
        }
    r.body["provenance"] = {{"label", job.config.label},
                            {"config_hash", hex64(fnv1a64(dump_config(job.config)))},
                            {"seed", job.config.seed},
                            {"jet_order", job.config.jet_order},
                            {"analyses_requested", job.config.analyses},
                            {"versions",
                             {{"hlap", kVersion}, {"eigen", eigen_version()}, {"gmp", std::string(gmp_version)}, {"fftw", std::string(fftw_version)}}}};
    r.body["analyses"] = analyses;
    return r;
}

std::string Report::json_text() const
{
    return body.dump(2) + "\n";
}

std::string Report::summary() const
{
    std::ostringstream os;
    os << body["provenance"]["label"].get<std::string>() << " (config " << body["provenance"]["config_hash"].get<std::string>()
       << ")\n";
    for (auto it = body["analyses"].begin(); it != body["analyses"].end(); ++it) {
        const Json& a = it.value();
        os << "  " << it.key() << ": " << a["status"].get<std::string>();
        if (a["status"] == "error")
            os << " " << a["message"].get<std::string>();
        else if (a["status"] == "skipped")
            os << " (" << a["reason"].get<std::string>() << ")";
        os << "\n";
    }
    return os.str();
}

std::string Report::csv() const
{
    std::ostringstream os;
    os << std::setprecision(17) << "analysis,index,time,axis,value\n";
    const Json& a = body["analyses"];
    if (a.contains("spectrum") && a["spectrum"]["status"] == "ok") {
        const Json& ev = a["spectrum"]["eigenvalues"];
        for (size_t i = 0; i < ev.size(); ++i)
            os << "spectrum," << i << ",,," << ev[i].dump() << "\n";
    }
    if (a.contains("probe") && a["probe"]["status"] == "ok") {
        const Json& p = a["probe"];
        for (size_t ax = 0; ax < p["initial_tail"].size(); ++ax)
            os << "probe,0,0," << ax << "," << p["initial_tail"][ax].dump() << "\n";
        for (size_t t = 0; t < p["times"].size(); ++t)
            for (size_t ax = 0; ax < p["tail"][t].size(); ++ax)
                os << "probe," << t + 1 << "," << p["times"][t].dump() << "," << ax << "," << p["tail"][t][ax].dump() << "\n";
    }
    return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::vector<std::string> golden_compare(const Json& report, const Json& golden)
{
    std::vector<std::string> diff;
    std::vector<std::string> names = golden.value("coordinates", std::vector<std::string>{});
    Chart chart(names);
    const Json tolerances = golden.value("tolerances", Json::object());
    auto lookup = [&](const std::string& ptr) -> const Json* {
        Json::json_pointer jp(ptr);
        return report.contains(jp) ? &report.at(jp) : nullptr;
    };
    auto same_expr = [&](const std::string& a, const std::string& b) {
        return identical(parse_expr(a, chart), parse_expr(b, chart));
    };

    const Json values = golden.value("values", Json::object());
    for (auto it = values.begin(); it != values.end(); ++it) {
        const Json* got = lookup(it.key());
        double tol = tolerances.value(it.key(), 0.0);
        if (!got)
            diff.push_back(it.key() + ": missing");
        else if (!close_values(*got, it.value(), tol))
            diff.push_back(it.key() + ": expected " + it.value().dump() + ", got " + got->dump());
    }
    const Json exprs = golden.value("expressions", Json::object());
    for (auto it = exprs.begin(); it != exprs.end(); ++it) {
        const Json* got = lookup(it.key());
        if (!got || !got->is_string())
            diff.push_back(it.key() + ": missing");
        else if (!same_expr(got->get<std::string>(), it.value().get<std::string>()))
            diff.push_back(it.key() + ": expected " + it.value().get<std::string>() + ", got " + got->get<std::string>());
    }
    const Json ops = golden.value("operators", Json::object());
    for (auto it = ops.begin(); it != ops.end(); ++it) {
        const Json* got = lookup(it.key());
        if (!got || !got->is_object()) {
            diff.push_back(it.key() + ": missing");
            continue;
        }
        std::vector<std::string> keys;
        for (auto k = it.value().begin(); k != it.value().end(); ++k)
            keys.push_back(k.key());
        for (auto k = got->begin(); k != got->end(); ++k)
            if (!it.value().contains(k.key()))
                keys.push_back(k.key());
        for (const auto& k : keys) {
            std::string want = it.value().value(k, std::string("0"));
            std::string have = got->value(k, std::string("0"));
            if (!same_expr(have, want))
                diff.push_back(it.key() + "/" + k + ": expected " + want + ", got " + have);
        }
    }
    const Json mats = golden.value("matrices", Json::object());
    for (auto it = mats.begin(); it != mats.end(); ++it) {
        const Json* got = lookup(it.key());
        const Json& want = it.value();
        if (!got || !got->is_array() || got->size() != want.size()) {
            diff.push_back(it.key() + ": missing or wrong shape");
            continue;
        }
        for (size_t i = 0; i < want.size(); ++i) {
            if ((*got)[i].size() != want[i].size()) {
                diff.push_back(it.key() + "/" + std::to_string(i) + ": wrong shape");
                continue;
            }
            for (size_t j = 0; j < want[i].size(); ++j)
                if (!same_expr((*got)[i][j].get<std::string>(), want[i][j].get<std::string>()))
                    diff.push_back(it.key() + "/" + std::to_string(i) + "/" + std::to_string(j) + ": expected " +
                                   want[i][j].get<std::string>() + ", got " + (*got)[i][j].get<std::string>());
        }
    }
    return diff;
}

} // namespace hlap
