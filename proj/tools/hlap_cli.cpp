#include "hlap/error.hpp"
#include "hlap/registry.hpp"
#include "hlap/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace hlap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAnalysis = 3;
constexpr int kExitGolden = 4;

struct Options {
    std::string config;
    std::string example;
    std::string out;
    std::vector<std::string> tol_overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> jet_order;
    std::string format = "json";
    std::string golden;
};

bool is_config_error(ErrorKind k)
{
    return k == ErrorKind::ConfigParse || k == ErrorKind::UnknownAnalysis || k == ErrorKind::UnknownLabel ||
           k == ErrorKind::ParseError;
}

JobConfig load(const Options& o)
{
    if (o.config.empty() == o.example.empty())
        throw Error(ErrorKind::ConfigParse, "give exactly one of --config and --example");
    JobConfig c = o.config.empty() ? registry_get(o.example) : load_config(o.config);
    for (const auto& kv : o.tol_overrides)
        apply_tolerance_override(c, kv);
    if (o.seed)
        c.seed = *o.seed;
    if (o.jet_order) {
        if (*o.jet_order < 1 || *o.jet_order > 8)
            throw Error(ErrorKind::ConfigParse, "--jet-order: expected 1..8");
        c.jet_order = *o.jet_order;
    }
    return c;
}

std::string render(const Report& r, const std::string& format)
{
    if (format == "text")
        return r.summary();
    if (format == "csv")
        return r.csv();
    return r.json_text();
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p);
    if (!f)
        throw Error(ErrorKind::ConfigParse, "cannot write " + p.string());
    f << text;
}

void emit(const Report& r, const JobConfig& c, const Options& o)
{
    if (o.out.empty()) {
        std::cout << render(r, o.format);
        return;
    }
    std::filesystem::create_directories(o.out);
    const std::string ext = o.format == "text" ? ".txt" : o.format == "csv" ? ".csv" : ".json";
    write_file(std::filesystem::path(o.out) / (c.label + ext), render(r, o.format));
    for (size_t i = 0; i < r.stiffness.size(); ++i) {
        std::ostringstream os;
        write_triplets(os, r.stiffness[i]);
        write_file(std::filesystem::path(o.out) / (c.label + "_stiffness.txt"), os.str());
    }
    std::cout << r.summary();
}

int run_analyses(const Options& o, const std::string& only)
{
    JobConfig c = load(o);
    if (!only.empty())
        c.analyses = {only};
    // Re-validate: the single requested analysis may need blocks the config lacks.
    c = parse_config(dump_config(c));
    Report r = run_job(resolve(c));
    emit(r, c, o);
    return r.failed ? kExitAnalysis : kExitOk;
}

int registry_command(const Options& o)
{
    if (!o.example.empty()) {
        std::cout << registry_source(o.example);
        return kExitOk;
    }
    for (const auto& l : registry_list())
        std::cout << l << "\n";
    return kExitOk;
}

int golden_command(const Options& o)
{
    JobConfig c = load(o);
    std::string path = o.golden.empty() ? std::string(HLAP_DATA_DIR) + "/golden/" + c.label + ".json" : o.golden;
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::ConfigParse, "cannot read golden file " + path);
    Json golden;
    try {
        golden = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigParse, std::string("golden file: ") + e.what());
    }
    Report r = run_job(resolve(c));
    std::vector<std::string> diff = golden_compare(r.body, golden);
    if (!o.out.empty())
        emit(r, c, o);
    for (const auto& d : diff)
        std::cout << "mismatch " << d << "\n";
    std::cout << c.label << ": " << (diff.empty() ? "golden match" : std::to_string(diff.size()) + " mismatches") << "\n";
    return diff.empty() ? kExitOk : kExitGolden;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Horizontal Laplacians of singular distributions"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "YAML job config");
    app.add_option("--example", o.example, "registry label");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--tol-override", o.tol_overrides, "tolerance override key=value");
    app.add_option("--seed", o.seed, "seed for randomized steps");
    app.add_option("--jet-order", o.jet_order, "jet order for fiber analysis");
    app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "text", "csv"}));
    app.add_option("--golden", o.golden, "golden file (golden subcommand)");

    app.add_subcommand("run", "run every analysis of the config");
    for (const std::string& a : {"fibers", "laplacian", "symbol", "hull", "derham", "isometry", "discretize", "spectrum", "probe"})
        app.add_subcommand(a, "run only the " + a + " analysis");
    app.add_subcommand("registry", "list built-in examples, or print one with --example");
    app.add_subcommand("golden", "compare a run with its golden file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        if (sub == "registry")
            return registry_command(o);
        if (sub == "golden")
            return golden_command(o);
        return run_analyses(o, sub == "run" ? std::string() : sub);
    } catch (const Error& e) {
        std::cerr << "hlap: " << e.what() << "\n";
        return is_config_error(e.kind()) ? kExitConfig : kExitAnalysis;
    } catch (const std::exception& e) {
        std::cerr << "hlap: " << e.what() << "\n";
        return kExitAnalysis;
    }
}
