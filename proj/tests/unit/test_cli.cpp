#include "hybridaug/manifest.hpp"
#include "synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run cli(const fs::path& scratch, const std::string& args, const std::string& env = "") {
    const fs::path out = scratch / "stdout.txt";
    const fs::path err = scratch / "stderr.txt";
    const std::string cmd = env + " '" HYBRIDAUG_CLI_PATH "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

nlohmann::json error_of(const Run& r) {
    const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
    REQUIRE(j.contains("error"));
    return j.at("error");
}

}  // namespace

TEST_CASE("usage errors") {
    const auto dir = hybridaug::testing::fresh_dir("cli_usage");
    auto r = cli(dir, "");
    CHECK(r.code == 2);
    CHECK(error_of(r).at("kind") == "invalid_argument");
    r = cli(dir, "compose --seed notanumber");
    CHECK(r.code == 2);
    r = cli(dir, "bogus");
    CHECK(r.code == 2);
    CHECK(cli(dir, "--help").code == 0);
}

TEST_CASE("typed failures map to exit codes") {
    const auto dir = hybridaug::testing::fresh_dir("cli_errors");
    auto r = cli(dir, "embed --out '" + (dir / "empty").string() + "'");
    CHECK(r.code == 3);
    CHECK(error_of(r).at("kind") == "missing_prerequisite");

    r = cli(dir, "compose --out '" + (dir / "run").string() + "'");
    CHECK(r.code == 3);
    CHECK(error_of(r).at("kind") == "missing_prerequisite");

    const auto d = hybridaug::testing::write_dry_run_dataset(dir / "data");
    std::ofstream(dir / "negative_sigma.json") << R"({"compose": {"counts": {"crack": 2}, "sketch_sigma": -1}})";
    r = cli(dir, "compose --manifest '" + d.manifest.string() + "' --config '" + (dir / "negative_sigma.json").string() +
                     "' --out '" + (dir / "run").string() + "'");
    CHECK(r.code == 2);
    CHECK(error_of(r).at("kind") == "invalid_argument");

    std::ofstream(dir / "bad.json") << "{ not json";
    r = cli(dir, "compose --config '" + (dir / "bad.json").string() + "'");
    CHECK(r.code == 2);
    CHECK(error_of(r).at("kind") == "schema_error");

    r = cli(dir, "serve --bind nowhere --out '" + (dir / "run").string() + "'");
    CHECK(r.code == 2);
}

TEST_CASE("dry run through the command line") {
    const auto dir = hybridaug::testing::fresh_dir("cli_dry_run");
    const auto d = hybridaug::testing::write_dry_run_dataset(dir / "data");
    const std::string run = (dir / "run").string();
    const std::string base = "--config '" + d.config.string() + "' --manifest '" + d.manifest.string() + "'";

    // Out directory from the environment, seed from the flag.
    auto r = cli(dir, "compose " + base + " --seed 11", "HYBRIDAUG_OUT='" + run + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto report = nlohmann::json::parse(r.out);
    CHECK(report.at("composites") == 60);
    CHECK(report.at("seed") == 11);
    CHECK(fs::exists(dir / "run/compose/records.jsonl"));

    r = cli(dir, "verify-stage " + base + " --out '" + run + "'");
    CHECK(r.code == 4);
    CHECK(error_of(r).at("kind") == "stage_verification_failed");
    hybridaug::testing::identity_stage(dir / "run/compose/composites", dir / "run/styled");
    r = cli(dir, "verify-stage " + base + " --out '" + run + "'");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(nlohmann::json::parse(r.out).at("passed") == true);

    for (const char* stage : {"embed", "filter", "metrics"}) {
        r = cli(dir, std::string(stage) + " " + base + " --out '" + run + "'");
        REQUIRE_MESSAGE(r.code == 0, stage << ": " << r.err);
        CHECK(nlohmann::json::parse(r.out).at("stage") == stage);
    }
    CHECK(fs::exists(dir / "run/embed/embedding.json"));
    CHECK(fs::exists(dir / "run/filter/curated_manifest.json"));
    CHECK(slurp(dir / "run/metrics/report.txt").find("f1") != std::string::npos);
    const auto m = hybridaug::load_manifest(dir / "run/manifest.json");
    CHECK(m.entries.size() == 6 + 12 + 3 + 60);
}
