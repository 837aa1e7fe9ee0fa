#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "cli.hpp"
#include "dynopt/errors.hpp"
#include "problem_file.hpp"

using namespace dynopt;
using namespace dynopt::cli;
namespace fs = std::filesystem;

namespace {

const std::string kCorpus = DYNOPT_CORPUS_DIR;
const fs::path kWork = DYNOPT_WORK_DIR;

std::string corpus(const std::string& name) { return kCorpus + "/" + name; }
std::string work(const std::string& name) { return (kWork / name).string(); }

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::string* header = nullptr) {
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

std::map<std::string, std::string> read_report(const std::string& path) {
    std::istringstream in(slurp(path));
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        REQUIRE(eq != std::string::npos);
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return kv;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string("\"") + DYNOPT_CLI_PATH + "\" " + args + " > \"" + work("stdout.txt") +
                            "\" 2> \"" + work("stderr.txt") + "\"";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

const char* kLq1 = R"(
[problem]
F = -(x^2 + u^2)/2
f = u
t0 = 0
t1 = 1
x0 = 1
)";

}  // namespace

TEST_CASE("problem file: required keys, defaults and name") {
    const ProblemFile pf = parse_problem_text(kLq1, "fallback");
    CHECK(pf.name == "fallback");
    CHECK(pf.problem.sense == Sense::maximize);
    CHECK(pf.problem.F == parse("-(x^2+u^2)/2"));
    CHECK(pf.problem.x0 == 1.0);
    CHECK_FALSE(pf.has_grid);
    CHECK(pf.shooting.dt == 1e-3);
    CHECK(parse_problem_text(std::string(kLq1) + "sense = minimize   ; cost\n").problem.sense == Sense::minimize);
    CHECK_THROWS_AS(bellman_config(pf), ConfigError);

    GridSection over;
    over.xmin = -1;
    over.xmax = 1;
    over.nx = 11;
    over.nt = 21;
    const BellmanConfig cfg = bellman_config(pf, over);
    CHECK(cfg.nx == 11);
    CHECK(cfg.nt == 21);
}

TEST_CASE("problem file: invalid input is rejected") {
    const std::string base = kLq1;
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = 0\nf = u\nt0 = 0\nt1 = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[mystery]\na = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = 0\nf = u\nt0 = 1\nt1 = 1\nx0 = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = p_x\nf = u\nt0 = 0\nt1 = 1\nx0 = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = 0\nf = u\nt0 = zero\nt1 = 1\nx0 = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "sense = sideways\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[grid]\nnx = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[grid]\nnt = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[grid]\nnx = 10.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[control]\numin = 1\numax = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[control]\numin = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[shooting]\nlambda0_bracket = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text(base + "[shooting]\ndt = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = 0\nf = v\nt0 = 0\nt1 = 1\nx0 = 0\n"), UnknownIdentifier);
    CHECK_THROWS_AS(parse_problem_text("[problem]\nF = 0\nf = u*\nt0 = 0\nt1 = 1\nx0 = 0\n"), ParseError);
}

TEST_CASE("num prints 17 significant digits") {
    CHECK(num(0.1) == "0.10000000000000001");
    CHECK(num(-0.5) == "-0.5");
    CHECK(num(1e-20) == "9.9999999999999995e-21");
    CHECK(num(std::nan("")) == "nan");
}

TEST_CASE("analyze: LQ1 report") {
    const Result r = invoke({"analyze", corpus("lq1.ini"), "--report", work("analyze.kv")});
    CHECK(r.code == kSuccess);
    CHECK(r.out.find("-u + p_x") != std::string::npos);
    const auto kv = read_report(work("analyze.kv"));
    CHECK(kv.at("Phi2") == "-u + p_x");
    CHECK(kv.at("det") == "1");
    CHECK(kv.at("classification") == "SecondClass");
    CHECK(kv.at("equivalence") == "true");
    CHECK(kv.at("surface.u") == "p_x");
    CHECK(kv.at("exit_code") == "0");
}

TEST_CASE("analyze: degenerate and malformed files") {
    const Result d = invoke({"analyze", corpus("linear_in_u.ini")});
    CHECK(d.code == kDegenerate);
    CHECK(d.err.find("second-class") != std::string::npos);

    const Result m = invoke({"analyze", corpus("malformed.ini")});
    CHECK(m.code == kInputError);
    CHECK(m.err.find("column 14") != std::string::npos);

    CHECK(invoke({"analyze", corpus("does_not_exist.ini")}).code == kInputError);
    CHECK(invoke({"analyze", corpus("quartic.ini")}).code == kSuccess);
}

TEST_CASE("pontryagin: LQ1 trajectory CSV") {
    const Result r = invoke({"pontryagin", corpus("lq1.ini"), "--out", work("lq1_traj.csv"), "--report", work("p.kv")});
    REQUIRE(r.code == kSuccess);
    std::string header;
    const auto rows = read_csv(work("lq1_traj.csv"), &header);
    CHECK(header == "t,x,lambda,u");
    REQUIRE(rows.size() == 1001);
    CHECK(std::abs(rows.front()[2] + std::tanh(1.0)) < 1e-6);
    CHECK(std::abs(rows.back()[1] - 1 / std::cosh(1.0)) < 1e-6);
    for (const auto& row : rows) CHECK(row[3] == doctest::Approx(row[2]).epsilon(1e-12));
    const auto kv = read_report(work("p.kv"));
    CHECK(std::abs(std::stod(kv.at("lambda_t0")) + std::tanh(1.0)) < 1e-6);

    const Result fast = invoke({"pontryagin", corpus("lq1.ini"), "--dt", "0.01", "--out", work("lq1_coarse.csv")});
    CHECK(fast.code == kSuccess);
    CHECK(read_csv(work("lq1_coarse.csv")).size() == 101);
}

TEST_CASE("pontryagin: zero costate and forced failure") {
    REQUIRE(invoke({"pontryagin", corpus("quadratic_cost.ini"), "--out", work("qc.csv")}).code == kSuccess);
    for (const auto& row : read_csv(work("qc.csv"))) CHECK(row[2] == 0.0);

    const Result r = invoke({"pontryagin", corpus("bad_bracket.ini"), "--out", work("bad.csv")});
    CHECK(r.code == kSolverFailure);
    CHECK(invoke({"pontryagin", corpus("lq1.ini"), "--dt", "-1"}).code == kInputError);
}

TEST_CASE("bellman: LQ1 value, CFL failure and zero problem") {
    const Result r = invoke({"bellman", corpus("lq1.ini"), "--out", work("lq1_grid.csv"), "--report", work("b.kv")});
    REQUIRE(r.code == kSuccess);
    const auto kv = read_report(work("b.kv"));
    CHECK(std::abs(std::stod(kv.at("J_x0_t0")) + std::tanh(1.0) / 2) < 5e-3);
    std::string header;
    const auto rows = read_csv(work("lq1_grid.csv"), &header);
    CHECK(header == "t,x,J,lambda,u_star");
    CHECK(rows.size() == 401u * 1001u);

    const Result cfl = invoke({"bellman", corpus("cfl_small_nt.ini"), "--out", work("cfl.csv")});
    CHECK(cfl.code == kSolverFailure);
    CHECK(cfl.err.find("required nt: 157") != std::string::npos);

    REQUIRE(invoke({"bellman", corpus("zero.ini"), "--out", work("zero.csv")}).code == kSuccess);
    for (const auto& row : read_csv(work("zero.csv"))) CHECK(row[2] == 0.0);

    CHECK(invoke({"bellman", corpus("no_grid.ini")}).code == kInputError);
    CHECK(invoke({"bellman", corpus("no_grid.ini"), "--xmin", "-1", "--xmax", "1", "--nx", "41", "--nt", "41", "--out",
               work("ng.csv")})
              .code == kSuccess);
}

TEST_CASE("verify: LQ1 passes, tampered field fails, degenerate stops early") {
    const Result ok = invoke({"verify", corpus("lq1.ini"), "--report", work("v.kv")});
    CHECK(ok.code == kSuccess);
    const auto kv = read_report(work("v.kv"));
    CHECK(kv.at("overall") == "pass");
    for (const char* check : {"symbolic_equivalence", "shoot_vs_hjb_lambda", "consistency_refinement",
                              "consistency_residual", "homogeneity", "dp_agreement", "closed_loop_vs_shot"}) {
        CHECK(kv.at(std::string("check.") + check + ".status") == "pass");
        CHECK(kv.count(std::string("check.") + check + ".measured") == 1);
    }

    const Result bad = invoke({"verify", corpus("lq1_tampered.ini"), "--report", work("vt.kv")});
    CHECK(bad.code == kVerificationFailed);
    const auto tk = read_report(work("vt.kv"));
    CHECK(tk.at("check.consistency_residual.status") == "fail");
    CHECK(tk.at("overall") == "fail");

    const Result deg = invoke({"verify", corpus("linear_in_u.ini"), "--report", work("vd.kv")});
    CHECK(deg.code == kDegenerate);
    CHECK(deg.out.empty());
}

TEST_CASE("quantum: LQ1 factors, zero residuals, missing grid") {
    const Result r = invoke({"quantum", corpus("lq1.ini"), "--report", work("q.kv")});
    REQUIRE(r.code == kSuccess);
    const auto kv = read_report(work("q.kv"));
    CHECK(kv.at("hjb.fine.r1") == "0");
    CHECK(std::abs(std::stod(kv.at("reference.factor.schrodinger")) - 4) <= 1.2);
    CHECK(std::abs(std::stod(kv.at("reference.factor.r2")) - 4) <= 1.2);
    CHECK(kv.at("alpha") == "-1");

    REQUIRE(invoke({"quantum", corpus("zero.ini"), "--report", work("qz.kv")}).code == kSuccess);
    const auto zk = read_report(work("qz.kv"));
    for (const char* key : {"hjb.coarse.r1", "hjb.coarse.r2", "hjb.coarse.schrodinger", "hjb.fine.r1", "hjb.fine.r2",
                            "hjb.fine.schrodinger"}) {
        CHECK(zk.at(key) == "0");
    }
    CHECK(invoke({"quantum", corpus("no_grid.ini")}).code == kInputError);
}

TEST_CASE("command line errors and help") {
    CHECK(invoke({}).code == kInputError);
    CHECK(invoke({"frobnicate", corpus("lq1.ini")}).code == kInputError);
    CHECK(invoke({"bellman", corpus("lq1.ini"), "--nx", "many"}).code == kInputError);
    for (const char* sub : {"analyze", "pontryagin", "bellman", "verify", "quantum"}) {
        const Result h = invoke({sub, "--help"});
        CHECK(h.code == kSuccess);
        CHECK(h.out.find("Usage") != std::string::npos);
    }
}

TEST_CASE("binary: every exit code is reachable from the corpus") {
    CHECK(run_binary("analyze \"" + corpus("lq1.ini") + "\"") == 0);
    CHECK(run_binary("verify \"" + corpus("lq1_tampered.ini") + "\"") == 1);
    CHECK(run_binary("analyze \"" + corpus("linear_in_u.ini") + "\"") == 2);
    CHECK(run_binary("pontryagin \"" + corpus("bad_bracket.ini") + "\" --out \"" + work("b.csv") + "\"") == 3);
    CHECK(run_binary("bellman \"" + corpus("cfl_small_nt.ini") + "\" --out \"" + work("c.csv") + "\"") == 3);
    CHECK(run_binary("analyze \"" + corpus("malformed.ini") + "\"") == 4);
}

TEST_CASE("binary: outputs are byte-identical across runs") {
    // Same paths each run; artifacts are copied aside in between.
    const std::vector<std::pair<std::string, std::string>> commands{
        {"p", "pontryagin \"" + corpus("lq1.ini") + "\" --out \"" + work("det.csv") + "\" --report \"" + work("det.kv") + "\""},
        {"b", "bellman \"" + corpus("lq1.ini") + "\" --nx 201 --nt 501 --out \"" + work("det.csv") + "\" --report \"" +
                  work("det.kv") + "\""},
        {"v", "verify \"" + corpus("quartic.ini") + "\" --report \"" + work("det.kv") + "\""},
        {"q", "quantum \"" + corpus("lq1.ini") + "\" --report \"" + work("det.kv") + "\""},
    };
    for (int k = 0; k < 2; ++k) {
        for (const auto& [tag, args] : commands) {
            fs::remove(work("det.csv"));
            REQUIRE(run_binary(args) == 0);
            const std::string stem = "det_" + tag + std::to_string(k);
            fs::copy_file(work("stdout.txt"), work(stem + ".txt"), fs::copy_options::overwrite_existing);
            fs::copy_file(work("det.kv"), work(stem + ".kv"), fs::copy_options::overwrite_existing);
            if (fs::exists(work("det.csv"))) {
                fs::copy_file(work("det.csv"), work(stem + ".csv"), fs::copy_options::overwrite_existing);
            }
        }
    }
    for (const auto& [tag, args] : commands) {
        for (const char* ext : {".txt", ".kv", ".csv"}) {
            const std::string a = work("det_" + tag + "0" + ext), b = work("det_" + tag + "1" + ext);
            if (!fs::exists(a)) continue;
            INFO(a);
            CHECK(slurp(a) == slurp(b));
        }
    }
}
