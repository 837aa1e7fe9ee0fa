#pragma once

// INI problem files:
//
//   [problem]   name, F, f, t0, t1, x0, sense (maximize | minimize)
//   [shooting]  dt, tol, max_iter, lambda0_bracket = lo, hi
//   [grid]      xmin, xmax, nx, nt, max_substeps
//   [control]   umin, umax
//   [quantum]   reference = J(x,t) known in closed form
//   [verify]    tolerances and lambda_field = λ(x,t) replacing the HJB field

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "dynopt/bellman.hpp"
#include "dynopt/pontryagin.hpp"
#include "dynopt/problem.hpp"

namespace dynopt::cli {

struct GridSection {
    std::optional<double> xmin, xmax;
    std::optional<int> nx, nt;
    std::optional<int> max_substeps;
};

struct VerifySection {
    double lambda_agreement = 1e-2;
    double consistency_ratio = 1.5;
    double consistency_max = 5e-2;
    double homogeneity = 5e-3;
    double dp_agreement = 5e-2;
    double closed_loop = 1e-2;
    std::optional<Expr> lambda_field;
};

struct ProblemFile {
    std::string name;
    ControlProblem problem;
    ShootingConfig shooting;
    bool has_grid = false;
    GridSection grid;
    std::optional<std::pair<double, double>> control_bounds;
    std::optional<Expr> quantum_reference;
    VerifySection verify;
};

/// Throws ConfigError (with the offending key) or ParseError for bad expressions.
ProblemFile parse_problem_text(const std::string& text, const std::string& default_name = "problem");
ProblemFile load_problem_file(const std::filesystem::path& path);

/// Grid section merged with command-line overrides; throws ConfigError when incomplete.
BellmanConfig bellman_config(const ProblemFile& pf, const GridSection& overrides = {});

}  // namespace dynopt::cli
