#include "doctest.h"

#include "hlap/error.hpp"
#include "hlap/registry.hpp"
#include "hlap/report.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hlap;

namespace {

const char* kGrushinThree = R"(label: grushin_three
chart: {coordinates: [x, y]}
distributions:
  - label: grushin
    generators: [["1", "0"], ["0", "x"]]
analyses: [laplacian, derham, metric]
)";

const char* kHeisenberg = R"(label: heis_small
chart: {coordinates: [x, y, z]}
distributions:
  - label: heisenberg
    generators: [["1", "0", "-1/2*y"], ["0", "1", "1/2*x"]]
analyses: [laplacian, hull, symbol]
hull: {max_depth: 2}
box: [[-1, 1], [-1, 1], [-1, 1]]
)";

std::filesystem::path scratch()
{
    auto p = std::filesystem::temp_directory_path() / "hlap_test_cli";
    std::filesystem::create_directories(p);
    return p;
}

std::filesystem::path write_temp(const std::string& name, const std::string& text)
{
    auto p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

int cli(const std::string& args)
{
    std::string cmd = std::string(HLAP_CLI_PATH) + " " + args + " > " + (scratch() / "stdout.txt").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

std::string cli_stdout()
{
    std::ifstream f(scratch() / "stdout.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ErrorKind kind_of(const std::string& yaml)
{
    try {
        parse_config(yaml);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("config accepted");
    return ErrorKind::ConfigParse;
}

Json golden_file(const std::string& label)
{
    std::ifstream f(std::string(HLAP_SOURCE_DIR) + "/data/golden/" + label + ".json");
    REQUIRE(f);
    return Json::parse(f);
}

} // namespace

TEST_CASE("registry contents")
{
    auto labels = registry_list();
    REQUIRE(labels.size() == 7);
    for (const auto& l : labels)
        CHECK_NOTHROW(registry_get(l));

    JobConfig g = registry_get("grushin");
    REQUIRE(g.distributions.size() == 1);
    CHECK(g.distributions[0].generators == std::vector<std::vector<std::string>>{{"1", "0"}, {"0", "x"}});
    JobConfig m = registry_get("martinet");
    CHECK(m.coordinates == std::vector<std::string>{"x", "y", "z"});
    CHECK(m.distributions[0].generators ==
          std::vector<std::vector<std::string>>{{"1", "0", "0"}, {"0", "1", "1/2*x^2"}});

    CHECK_THROWS_AS(registry_get("nope"), Error);
    try {
        registry_source("nope");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownLabel);
    }
}

TEST_CASE("config validation")
{
    CHECK(kind_of("label: [") == ErrorKind::ConfigParse);
    CHECK(kind_of("label: a\n") == ErrorKind::ConfigParse);
    std::string base = kGrushinThree;
    CHECK(kind_of(base + "colour: red\n") == ErrorKind::ConfigParse);
    std::string bogus = base;
    bogus.replace(bogus.find("analyses: ["), 11, "analyses: [bogus, ");
    CHECK(kind_of(bogus) == ErrorKind::UnknownAnalysis);
    std::string needs_box = base;
    needs_box.replace(needs_box.find("metric]"), 7, "metric, spectrum]");
    CHECK(kind_of(needs_box) == ErrorKind::ConfigParse);
    std::string bad_expr = base;
    bad_expr.replace(bad_expr.find("\"x\"]"), 3, "\"x +\"");
    CHECK(kind_of(bad_expr) == ErrorKind::ConfigParse);
    std::string bad_dim = base;
    bad_dim.replace(bad_dim.find("[\"1\", \"0\"]"), 10, "[\"1\"]");
    CHECK(kind_of(bad_dim) == ErrorKind::ConfigParse);

    JobConfig c = parse_config(kGrushinThree);
    CHECK(c.tolerances.at("weighted_symmetry") == doctest::Approx(1e-12));
    apply_tolerance_override(c, "weighted_symmetry=1e-10");
    CHECK(c.tolerances.at("weighted_symmetry") == doctest::Approx(1e-10));
    CHECK_THROWS_AS(apply_tolerance_override(c, "nonsense=1"), Error);
    CHECK_THROWS_AS(apply_tolerance_override(c, "weighted_symmetry"), Error);
}

TEST_CASE("dump and parse round trip")
{
    for (const auto& l : registry_list()) {
        JobConfig c = registry_get(l);
        std::string once = dump_config(c);
        CHECK(dump_config(parse_config(once)) == once);
    }
}

TEST_CASE("empty analysis list gives a provenance-only report")
{
    std::string text = kGrushinThree;
    text.replace(text.find("[laplacian, derham, metric]"), 27, "[]");
    Report r = run_job(resolve(parse_config(text)));
    CHECK_FALSE(r.failed);
    CHECK(r.body.at("analyses").empty());
    CHECK(r.body.at("provenance").at("label") == "grushin_three");
    CHECK(r.body.at("provenance").at("versions").contains("hlap"));
}

TEST_CASE("one failing analysis does not stop the others")
{
    Report r = run_job(resolve(parse_config(kGrushinThree)));
    CHECK(r.failed);
    const Json& a = r.body.at("analyses");
    CHECK(a.at("derham").at("status") == "error");
    CHECK(a.at("derham").at("kind") == "NotInvolutive");
    CHECK(a.at("laplacian").at("status") == "ok");
    CHECK(a.at("metric").at("status") == "ok");
}

TEST_CASE("heisenberg laplacian, hull and symbol")
{
    Report r = run_job(resolve(parse_config(kHeisenberg)));
    CHECK_FALSE(r.failed);
    const Json& a = r.body.at("analyses");
    CHECK(a.at("hull").at("bracket_generating") == true);
    CHECK(a.at("symbol").at("matches_cometric") == true);
    CHECK(a.at("symbol").at("routes_agree") == true);
    CHECK(a.at("laplacian").at("divergence_form_match") == true);
    Json g = golden_file("heisenberg");
    Json subset{{"coordinates", g["coordinates"]}, {"operators", g["operators"]}};
    subset["matrices"]["/analyses/hull/new_fields/1"] = g["matrices"]["/analyses/hull/new_fields/1"];
    CHECK(golden_compare(r.body, subset).empty());
    // fibers, metric and isometry were not requested
    CHECK(golden_compare(r.body, g).size() == 3);
}

TEST_CASE("determinism")
{
    for (const char* l : {"grushin", "bump_line"}) {
        std::string a = run_job(resolve(registry_get(l))).json_text();
        std::string b = run_job(resolve(registry_get(l))).json_text();
        CHECK(a == b);
    }
}

TEST_CASE("bundled golden files match")
{
    for (const auto& l : registry_list()) {
        Report r = run_job(resolve(registry_get(l)));
        auto d = golden_compare(r.body, golden_file(l));
        CHECK_MESSAGE(d.empty(), l << ": " << (d.empty() ? "" : d.front()));
    }
}

TEST_CASE("golden comparison catches a perturbed coefficient")
{
    Report r = run_job(resolve(registry_get("grushin")));
    Json g = golden_file("grushin");
    CHECK(golden_compare(r.body, g).empty());

    Json bad = g;
    bad["operators"]["/analyses/laplacian/operator"]["dydy"] = "-x^2 - x^4";
    auto d = golden_compare(r.body, bad);
    REQUIRE(d.size() == 1);
    CHECK(d[0].find("dydy") != std::string::npos);

    bad = g;
    bad["values"]["/analyses/fibers/points/0/dims"] = Json::array({2, 2, 0});
    CHECK(golden_compare(r.body, bad).size() == 1);

    bad = g;
    bad["values"]["/analyses/nowhere"] = 1;
    CHECK(golden_compare(r.body, bad).size() == 1);

    // A coefficient present in the report but absent from the golden must be zero.
    bad = g;
    bad["operators"]["/analyses/laplacian/operator"].erase("dydy");
    CHECK(golden_compare(r.body, bad).size() == 1);
}

TEST_CASE("cli exit codes")
{
    CHECK(cli("registry") == 0);
    CHECK(cli_stdout().find("heisenberg\n") != std::string::npos);
    CHECK(cli("registry --example grushin") == 0);
    CHECK(cli_stdout().find("label: grushin") != std::string::npos);

    CHECK(cli("run --example bump_line --format text") == 0);
    CHECK(cli("laplacian --example heisenberg") == 0);
    CHECK(Json::parse(cli_stdout()).at("analyses").size() == 1);
    CHECK(cli("golden --example grushin") == 0);
    CHECK(cli_stdout().find("golden match") != std::string::npos);

    CHECK(cli("run --example nope") == 2);
    CHECK(cli("run --example grushin --bogus-flag") == 2);
    CHECK(cli("run") == 2);
    CHECK(cli("run --config " + write_temp("broken.yaml", "label: [\n").string()) == 2);
    CHECK(cli("run --example grushin --tol-override nonsense=1") == 2);
    CHECK(cli("spectrum --config " + write_temp("nobox.yaml", kGrushinThree).string()) == 2);

    CHECK(cli("run --config " + write_temp("three.yaml", kGrushinThree).string()) == 3);

    Json bad = golden_file("grushin");
    bad["operators"]["/analyses/laplacian/operator"]["dxdx"] = "-2";
    auto gp = write_temp("bad_golden.json", bad.dump());
    CHECK(cli("golden --example grushin --golden " + gp.string()) == 4);
    CHECK(cli_stdout().find("mismatch /analyses/laplacian/operator/dxdx") != std::string::npos);
}

TEST_CASE("cli output directory")
{
    auto out = scratch() / "out";
    std::filesystem::remove_all(out);
    REQUIRE(cli("run --example bump_line --out " + out.string()) == 0);
    CHECK(std::filesystem::exists(out / "bump_line.json"));
    std::ifstream f(out / "bump_line_stiffness.txt");
    std::string line;
    int rows = 0;
    while (std::getline(f, line))
        ++rows;
    std::ifstream jf(out / "bump_line.json");
    Json body = Json::parse(jf);
    CHECK(rows == body.at("analyses").at("discretize").at("nonzeros").get<int>());
    CHECK(rows < 63 + 2 * 62); // the coefficient vanishes outside (-1, 1)
}
