#include "hlap/config.hpp"

#include "hlap/error.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace hlap {

namespace {

[[noreturn]] void fail(const std::string& what)
{
    throw Error(ErrorKind::ConfigParse, what);
}

const std::set<std::string>& top_level_keys()
{
    static const std::set<std::string> k{"label",     "chart",  "distributions", "density",     "presentation",
                                         "partition", "box",    "points",        "analyses",    "hull",
                                         "isometry",  "grid",   "spectrum",      "probe",       "consistency",
                                         "tolerances", "seed",  "jet_order"};
    return k;
}

bool needs_box(const std::string& a)
{
    return a == "ims" || a == "discretize" || a == "spectrum" || a == "probe" || a == "consistency";
}

bool needs_grid(const std::string& a)
{
    return a == "discretize" || a == "spectrum" || a == "probe";
}

double to_double(const YAML::Node& n, const std::string& where)
{
    if (!n.IsScalar())
        fail(where + ": expected a number");
    const std::string s = n.Scalar();
    if (s == "inf" || s == "+inf" || s == ".inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-.inf")
        return -std::numeric_limits<double>::infinity();
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size())
            fail(where + ": expected a number, got '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        fail(where + ": expected a number, got '" + s + "'");
    }
}

long to_long(const YAML::Node& n, const std::string& where)
{
    double v = to_double(n, where);
    if (v != std::floor(v) || std::abs(v) > 1e15)
        fail(where + ": expected an integer");
    return static_cast<long>(v);
}

std::string to_str(const YAML::Node& n, const std::string& where)
{
    if (!n.IsScalar())
        fail(where + ": expected a scalar");
    return n.Scalar();
}

template <class T, class F>
std::vector<T> seq(const YAML::Node& n, const std::string& where, F&& item)
{
    if (!n.IsSequence())
        fail(where + ": expected a sequence");
    std::vector<T> out;
    for (size_t i = 0; i < n.size(); ++i)
        out.push_back(item(n[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Point point(const YAML::Node& n, const std::string& where)
{
    return seq<double>(n, where, to_double);
}

Box box(const YAML::Node& n, const std::string& where)
{
    return seq<Interval>(n, where, [](const YAML::Node& iv, const std::string& w) {
        Point p = point(iv, w);
        if (p.size() != 2 || !(p[0] < p[1]))
            fail(w + ": expected [lo, hi] with lo < hi");
        return Interval{p[0], p[1]};
    });
}

std::vector<std::string> strings(const YAML::Node& n, const std::string& where)
{
    return seq<std::string>(n, where, to_str);
}

void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where)
{
    if (!n.IsMap())
        fail(where + ": expected a mapping");
    for (const auto& kv : n) {
        std::string k = kv.first.as<std::string>();
        if (!allowed.count(k))
            fail(where + ": unknown key '" + k + "'");
    }
}

void check_dim(size_t got, size_t dim, const std::string& where)
{
    if (got != dim)
        fail(where + ": expected " + std::to_string(dim) + " entries, got " + std::to_string(got));
}

std::string number_text(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void validate(const JobConfig& c)
{
    const size_t dim = c.coordinates.size();
    if (c.label.empty())
        fail("label: missing");
    if (dim == 0)
        fail("chart.coordinates: missing");
    if (!c.region.empty())
        check_dim(c.region.size(), dim, "chart.region");
    if (c.distributions.empty())
        fail("distributions: at least one is required");
    std::set<std::string> labels;
    for (const auto& d : c.distributions) {
        if (!labels.insert(d.label).second)
            fail("distributions: duplicate label '" + d.label + "'");
        for (const auto& g : d.generators)
            check_dim(g.size(), dim, "distributions." + d.label);
    }
    if (c.presentation.mode != "minimal" && c.presentation.mode != "generators")
        fail("presentation.mode: expected minimal or generators");
    if (!c.presentation.base_point.empty())
        check_dim(c.presentation.base_point.size(), dim, "presentation.base_point");
    for (int a : c.partition_axes)
        if (a < 0 || a >= static_cast<int>(dim))
            fail("partition.axes: axis out of range");
    if (!c.box.empty()) {
        check_dim(c.box.size(), dim, "box");
        for (const auto& iv : c.box)
            if (!iv.bounded())
                fail("box: must be bounded");
    }
    for (const auto& p : c.points)
        check_dim(p.size(), dim, "points");
    std::set<std::string> seen;
    for (const auto& a : c.analyses) {
        if (std::find(known_analyses().begin(), known_analyses().end(), a) == known_analyses().end())
            throw Error(ErrorKind::UnknownAnalysis, "'" + a + "'");
        if (!seen.insert(a).second)
            fail("analyses: duplicate '" + a + "'");
        if (needs_box(a) && c.box.empty())
            fail("analysis " + a + " needs a box");
        if (needs_grid(a) && !c.grid)
            fail("analysis " + a + " needs a grid block");
        if (a == "isometry" && !c.isometry)
            fail("analysis isometry needs an isometry block");
        if (a == "consistency" && c.consistency_function.empty())
            fail("analysis consistency needs consistency.function");
    }
    if (c.hull_depth < 1 || c.hull_depth > kMaxHullDepth)
        fail("hull.max_depth: expected 1.." + std::to_string(kMaxHullDepth));
    if (c.isometry) {
        check_dim(c.isometry->forward.size(), dim, "isometry.forward");
        check_dim(c.isometry->inverse.size(), dim, "isometry.inverse");
        if (!c.isometry->target.empty() && !labels.count(c.isometry->target))
            fail("isometry.target: unknown distribution '" + c.isometry->target + "'");
    }
    if (c.grid) {
        check_dim(c.grid->n.size(), dim, "grid.n");
        check_dim(c.grid->boundary.size(), dim, "grid.boundary");
        for (int v : c.grid->n)
            if (v < 4)
                fail("grid.n: at least 4 nodes per axis");
    }
    if (c.spectrum_count < 1)
        fail("spectrum.count: must be positive");
    for (double t : c.probe_times)
        if (!(t > 0.0))
            fail("probe.times: must be positive");
    if (!c.probe_source.empty())
        check_dim(c.probe_source.size(), dim, "probe.source");
    for (const auto& [k, v] : c.tolerances)
        if (!default_tolerances().count(k))
            fail("tolerances: unknown key '" + k + "'");
    if (c.jet_order < 1 || c.jet_order > 8)
        fail("jet_order: expected 1..8");
}

} // namespace

const std::vector<std::string>& known_analyses()
{
    static const std::vector<std::string> a{"fibers", "presentation", "metric",  "laplacian",  "symbol",
                                            "ims",    "hull",         "derham",  "isometry",   "discretize",
                                            "spectrum", "probe",      "consistency"};
    return a;
}

const std::map<std::string, double>& default_tolerances()
{
    static const std::map<std::string, double> t{{"weighted_symmetry", 1e-12}, {"dirichlet_identity", 1e-12},
                                                 {"eigen_residual", 1e-8},     {"spectrum_floor", -1e-9},
                                                 {"probe_decay", 1e-2},        {"consistency_order", 1.9}};
    return t;
}

JobConfig parse_config(const std::string& yaml_text)
{
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        fail(std::string("yaml: ") + e.what());
    }
    check_keys(root, top_level_keys(), "config");
    JobConfig c;
    try {
        if (root["label"])
            c.label = to_str(root["label"], "label");
        if (!root["chart"])
            fail("chart: missing");
        check_keys(root["chart"], {"coordinates", "region"}, "chart");
        if (!root["chart"]["coordinates"])
            fail("chart.coordinates: missing");
        c.coordinates = strings(root["chart"]["coordinates"], "chart.coordinates");
        if (root["chart"]["region"])
            c.region = box(root["chart"]["region"], "chart.region");
        if (!root["distributions"])
            fail("distributions: missing");
        c.distributions = seq<DistributionSpec>(root["distributions"], "distributions", [](const YAML::Node& n, const std::string& w) {
            check_keys(n, {"label", "generators"}, w);
            DistributionSpec d;
            d.label = n["label"] ? to_str(n["label"], w + ".label") : std::string();
            if (!n["generators"])
                fail(w + ".generators: missing");
            d.generators = seq<std::vector<std::string>>(n["generators"], w + ".generators", strings);
            return d;
        });
        for (size_t i = 0; i < c.distributions.size(); ++i)
            if (c.distributions[i].label.empty())
                c.distributions[i].label = i == 0 ? c.label : c.label + "_" + std::to_string(i);
        if (root["density"])
            c.density = to_str(root["density"], "density");
        if (const auto& p = root["presentation"]) {
            check_keys(p, {"mode", "base_point"}, "presentation");
            if (p["mode"])
                c.presentation.mode = to_str(p["mode"], "presentation.mode");
            if (p["base_point"])
                c.presentation.base_point = point(p["base_point"], "presentation.base_point");
        }
        if (const auto& p = root["partition"]) {
            check_keys(p, {"axes"}, "partition");
            if (p["axes"])
                c.partition_axes = seq<int>(p["axes"], "partition.axes",
                                            [](const YAML::Node& n, const std::string& w) { return static_cast<int>(to_long(n, w)); });
        }
        if (root["box"])
            c.box = box(root["box"], "box");
        if (root["points"])
            c.points = seq<Point>(root["points"], "points", point);
        if (root["analyses"] && !root["analyses"].IsNull())
            c.analyses = strings(root["analyses"], "analyses");
        if (const auto& h = root["hull"]) {
            check_keys(h, {"max_depth"}, "hull");
            if (h["max_depth"])
                c.hull_depth = static_cast<int>(to_long(h["max_depth"], "hull.max_depth"));
        }
        if (const auto& m = root["isometry"]) {
            check_keys(m, {"forward", "inverse", "target"}, "isometry");
            IsometrySpec s;
            if (!m["forward"] || !m["inverse"])
                fail("isometry: forward and inverse are required");
            s.forward = strings(m["forward"], "isometry.forward");
            s.inverse = strings(m["inverse"], "isometry.inverse");
            if (m["target"])
                s.target = to_str(m["target"], "isometry.target");
            c.isometry = s;
        }
        if (const auto& g = root["grid"]) {
            check_keys(g, {"n", "boundary"}, "grid");
            GridSpec s;
            if (!g["n"])
                fail("grid.n: missing");
            s.n = seq<int>(g["n"], "grid.n", [](const YAML::Node& n, const std::string& w) { return static_cast<int>(to_long(n, w)); });
            if (g["boundary"])
                s.boundary = seq<Boundary>(g["boundary"], "grid.boundary", [](const YAML::Node& n, const std::string& w) {
                    std::string b = to_str(n, w);
                    if (b == "dirichlet")
                        return Boundary::Dirichlet;
                    if (b == "periodic")
                        return Boundary::Periodic;
                    fail(w + ": expected dirichlet or periodic");
                });
            else
                s.boundary.assign(s.n.size(), Boundary::Dirichlet);
            c.grid = s;
        }
        if (const auto& s = root["spectrum"]) {
            check_keys(s, {"count"}, "spectrum");
            if (s["count"])
                c.spectrum_count = static_cast<int>(to_long(s["count"], "spectrum.count"));
        }
        if (const auto& p = root["probe"]) {
            check_keys(p, {"times", "source"}, "probe");
            if (p["times"])
                c.probe_times = seq<double>(p["times"], "probe.times", to_double);
            if (p["source"])
                c.probe_source = point(p["source"], "probe.source");
        }
        if (const auto& s = root["consistency"]) {
            check_keys(s, {"function"}, "consistency");
            if (s["function"])
                c.consistency_function = to_str(s["function"], "consistency.function");
        }
        if (const auto& t = root["tolerances"]) {
            if (!t.IsMap())
                fail("tolerances: expected a mapping");
            for (const auto& kv : t)
                c.tolerances[kv.first.as<std::string>()] = to_double(kv.second, "tolerances." + kv.first.as<std::string>());
        }
        if (root["seed"])
            c.seed = static_cast<std::uint64_t>(to_long(root["seed"], "seed"));
        if (root["jet_order"])
            c.jet_order = static_cast<int>(to_long(root["jet_order"], "jet_order"));
    } catch (const YAML::Exception& e) {
        fail(std::string("yaml: ") + e.what());
    }
    validate(c);
    for (const auto& [k, v] : default_tolerances())
        c.tolerances.emplace(k, v);
    resolve(c);
    return c;
}

JobConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const JobConfig& c)
{
    YAML::Emitter out;
    auto str = [&](const std::string& s) { out << YAML::DoubleQuoted << s; };
    auto strs = [&](const std::vector<std::string>& v) {
        out << YAML::Flow << YAML::BeginSeq;
        for (const auto& s : v)
            str(s);
        out << YAML::EndSeq;
    };
    auto pt = [&](const Point& p) {
        out << YAML::Flow << YAML::BeginSeq;
        for (double v : p)
            out << number_text(v);
        out << YAML::EndSeq;
    };
    auto bx = [&](const Box& b) {
        out << YAML::Flow << YAML::BeginSeq;
        for (const auto& iv : b)
            pt({iv.lo, iv.hi});
        out << YAML::EndSeq;
    };

    out << YAML::BeginMap;
    out << YAML::Key << "label" << YAML::Value;
    str(c.label);
    out << YAML::Key << "chart" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "coordinates" << YAML::Value;
    strs(c.coordinates);
    if (!c.region.empty()) {
        out << YAML::Key << "region" << YAML::Value;
        bx(c.region);
    }
    out << YAML::EndMap;
    out << YAML::Key << "distributions" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : c.distributions) {
        out << YAML::BeginMap << YAML::Key << "label" << YAML::Value;
        str(d.label);
        out << YAML::Key << "generators" << YAML::Value << YAML::BeginSeq;
        for (const auto& g : d.generators)
            strs(g);
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "density" << YAML::Value;
    str(c.density);
    out << YAML::Key << "presentation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << c.presentation.mode;
    if (!c.presentation.base_point.empty()) {
        out << YAML::Key << "base_point" << YAML::Value;
        pt(c.presentation.base_point);
    }
    out << YAML::EndMap;
    if (!c.partition_axes.empty()) {
        out << YAML::Key << "partition" << YAML::Value << YAML::BeginMap << YAML::Key << "axes" << YAML::Value
            << YAML::Flow << c.partition_axes << YAML::EndMap;
    }
    if (!c.box.empty()) {
        out << YAML::Key << "box" << YAML::Value;
        bx(c.box);
    }
    if (!c.points.empty()) {
        out << YAML::Key << "points" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : c.points)
            pt(p);
        out << YAML::EndSeq;
    }
    out << YAML::Key << "analyses" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& a : c.analyses)
        out << a;
    out << YAML::EndSeq;
    out << YAML::Key << "hull" << YAML::Value << YAML::BeginMap << YAML::Key << "max_depth" << YAML::Value
        << c.hull_depth << YAML::EndMap;
    if (c.isometry) {
        out << YAML::Key << "isometry" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "forward" << YAML::Value;
        strs(c.isometry->forward);
        out << YAML::Key << "inverse" << YAML::Value;
        strs(c.isometry->inverse);
        if (!c.isometry->target.empty()) {
            out << YAML::Key << "target" << YAML::Value;
            str(c.isometry->target);
        }
        out << YAML::EndMap;
    }
    if (c.grid) {
        out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "n" << YAML::Value << YAML::Flow << c.grid->n;
        out << YAML::Key << "boundary" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (Boundary b : c.grid->boundary)
            out << (b == Boundary::Dirichlet ? "dirichlet" : "periodic");
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::Key << "spectrum" << YAML::Value << YAML::BeginMap << YAML::Key << "count" << YAML::Value
        << c.spectrum_count << YAML::EndMap;
    out << YAML::Key << "probe" << YAML::Value << YAML::BeginMap << YAML::Key << "times" << YAML::Value;
    pt(c.probe_times);
    if (!c.probe_source.empty()) {
        out << YAML::Key << "source" << YAML::Value;
        pt(c.probe_source);
    }
    out << YAML::EndMap;
    if (!c.consistency_function.empty()) {
        out << YAML::Key << "consistency" << YAML::Value << YAML::BeginMap << YAML::Key << "function" << YAML::Value;
        str(c.consistency_function);
        out << YAML::EndMap;
    }
    out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : c.tolerances)
        out << YAML::Key << k << YAML::Value << number_text(v);
    out << YAML::EndMap;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "jet_order" << YAML::Value << c.jet_order;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void apply_tolerance_override(JobConfig& c, const std::string& kv)
{
    auto eq = kv.find('=');
    if (eq == std::string::npos)
        fail("tolerance override '" + kv + "': expected key=value");
    std::string k = kv.substr(0, eq);
    if (!default_tolerances().count(k))
        fail("tolerance override: unknown key '" + k + "'");
    YAML::Node n(kv.substr(eq + 1));
    c.tolerances[k] = to_double(n, "tolerance override " + k);
}

const Distribution& Job::distribution(const std::string& label) const
{
    for (const auto& d : distributions)
        if (d.label == label)
            return d;
    throw Error(ErrorKind::ConfigParse, "unknown distribution '" + label + "'");
}

Job resolve(const JobConfig& c)
{
    Job j;
    j.config = c;
    try {
        j.chart = Chart(c.coordinates, c.region);
        for (const auto& spec : c.distributions) {
            std::vector<VectorField> gens;
            for (const auto& g : spec.generators) {
                ExprVec v;
                for (const auto& s : g)
                    v.push_back(parse_expr(s, j.chart));
                gens.emplace_back(j.chart, v);
            }
            j.distributions.emplace_back(j.chart, gens, spec.label);
        }
        j.density = Density(j.chart, parse_expr(c.density, j.chart));
        if (c.isometry)
            for (const auto* side : {&c.isometry->forward, &c.isometry->inverse})
                for (const auto& s : *side)
                    parse_expr(s, j.chart);
        if (!c.consistency_function.empty())
            parse_expr(c.consistency_function, j.chart);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigParse)
            throw;
        fail(e.what());
    }
    return j;
}

} // namespace hlap
