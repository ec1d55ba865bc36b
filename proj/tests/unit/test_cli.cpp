#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "ltm/experiments.hpp"

namespace {

std::string tmp(const std::string& name) {
    const char* dir = std::getenv("TMPDIR");
    return std::string(dir ? dir : "/tmp") + "/ltm_cli_test_" + name;
}

int run(const std::string& args, const std::string& out_file = "/dev/null") {
    const std::string cmd = std::string(LTM_CLI_PATH) + " " + args + " > " + out_file + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("successful commands exit 0 and emit parseable tables") {
    const auto out = tmp("ss.csv");
    CHECK(run("--preset baseline steady-state --delta 1e8", out) == 0);
    const auto t = ltm::parse_csv(slurp(out));
    CHECK(t.rows.size() == 1);
    CHECK(*t.column("n")[0] > 0.0);

    const auto sweep = tmp("sweep.json");
    CHECK(run("--preset baseline --format json sweep --axis1 drive.delta:0:1e8:3", sweep) == 0);
    const auto s = ltm::parse_json(slurp(sweep));
    CHECK(s.rows.size() == 3);
    CHECK(s.provenance_value("solver_calls") == "3");

    CHECK(run("--preset baseline operating-point") == 0);
    CHECK(run("--preset high_sensitivity --set drive.delta=1e7 steady-state") == 0);
    std::remove(out.c_str());
    std::remove(sweep.c_str());
}

TEST_CASE("usage errors exit 1") {
    CHECK(run("--preset nonexistent steady-state") == 1);
    CHECK(run("--preset baseline --set drive.nothing=1 steady-state") == 1);
    CHECK(run("--preset baseline sweep --axis1 drive.delta:0:1") == 1);
    CHECK(run("--preset baseline experiment fig9") == 1);
    CHECK(run("--preset baseline --format xml steady-state") == 1);
    CHECK(run("--preset baseline --config /nonexistent.ini steady-state") == 1);
}

TEST_CASE("physics-domain errors exit 3") {
    // identical detunings
    CHECK(run("--preset baseline response --from 1e8 --to 1e8") == 3);
    // dark at the requested field
    CHECK(run("--preset high_sensitivity sensitivity-dc --field 0") == 3);
}
