#pragma once

// Backward solution of J_t + max_u (F + J_x f) = 0, J(x, t1) = salvage (0 by default),
// with an explicit monotone upwind scheme.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dynopt/expr.hpp"
#include "dynopt/grid.hpp"
#include "dynopt/problem.hpp"

namespace dynopt {

struct BellmanConfig {
    double xmin = -2.0;
    double xmax = 2.0;
    int nx = 401;
    int nt = 1001;
    /// Explicit steps allowed per output interval before CFLViolation.
    int max_substeps = 16;
    /// Golden-section inner maximization on [umin, umax] when H₀ is not quadratic in u.
    std::optional<std::pair<double, double>> control_bounds;
    /// Terminal value J(x, t1); zero when absent.
    std::optional<Expr> salvage;

    /// Throws ConfigError / GridError.
    void validate() const;
};

struct CflStats {
    double max_speed = 0.0;    ///< max |f(x, u*, t)| seen by the scheme
    double max_courant = 0.0;  ///< max dt_sub · |f| / dx over accepted steps
    int max_substeps = 0;      ///< most sub-steps used in one output interval
    long total_steps = 0;
};

struct ValueGrid {
    Field2D J;
    Field2D lambda;  ///< ∂J/∂x
    Field2D u_star;  ///< u*(x, λ(x,t), t)
    CflStats cfl;

    const Axis& x_axis() const { return J.x_axis(); }
    const Axis& t_axis() const { return J.t_axis(); }
};

/// Throws CFLViolation (with the smallest workable Nt), WrongCurvature, DegenerateError.
ValueGrid solve_hjb(const ControlProblem& p, const BellmanConfig& cfg);
ValueGrid solve_hjb(const ControlProblem& p, double xmin, double xmax, int nx, int nt);

/// One explicit backward step of the upwind scheme: J(·, t) → J(·, t − h).
/// Throws CFLViolation when h · max|f| > dx for this slice.
std::vector<double> hjb_step(const ControlProblem& p, const Axis& x, const std::vector<double>& J, double t, double h,
                             const std::optional<std::pair<double, double>>& control_bounds = std::nullopt);

/// Central differences inside, second-order one-sided at the edges.
Field2D lambda_field(const ValueGrid& grid);

struct HomogeneityReport {
    Field2D residual;                ///< F(x,u*,t) + J_x f(x,u*,t) + J_t
    std::vector<double> slice_max;   ///< max |residual| over the window, per t node
    std::vector<double> slice_mean;  ///< signed mean over the window, per t node
    double max_abs = 0.0;            ///< over the window, interior t only
};

HomogeneityReport homogeneity_check(const ValueGrid& grid, const ControlProblem& p, const Window& w = {});

/// Window max of consistency_residual on the grid's λ field.
double verify_consistency(const ValueGrid& grid, const ControlProblem& p, const Window& w = {});

/// Discrete dynamic programming with enumerated controls and clamped linear
/// interpolation in x. Requires nx ≤ 101 and at most 41 controls.
ValueGrid brute_force_dp(const ControlProblem& p, const Axis& x, int nt, const std::vector<double>& controls);

/// Evenly spaced control set on [lo, hi].
std::vector<double> control_set(double lo, double hi, int n);

/// Grid built from a known value function; λ = ∂J/∂x is differentiated exactly.
ValueGrid tabulate_value_function(const ControlProblem& p, const Expr& J, const Axis& x, const Axis& t);
ValueGrid tabulate_value_function(const ControlProblem& p, const std::function<double(double, double)>& J,
                                  const std::function<double(double, double)>& J_x, const Axis& x, const Axis& t);

/// Coarser grid with every other node: (n − 1)/2 + 1 per axis. Throws GridError when n − 1 is odd.
int coarsen(int n);

}  // namespace dynopt
