#pragma once

// Open-loop Pontryagin solution by RK4 shooting, the action functional and the
// closed-loop consistency residual. All quantities refer to the maximization
// form of the problem (payoff −F for minimize).

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dynopt/expr.hpp"
#include "dynopt/grid.hpp"
#include "dynopt/problem.hpp"

namespace dynopt {

/// u*(x, λ, t) maximizing H₀ = payoff + λ f.
class ControlLaw {
public:
    /// Throws DegenerateError when H₀ is linear in u. When H₀ does not involve u at
    /// all every control is optimal and the law returns 0.
    explicit ControlLaw(const ControlProblem& p);

    /// Throws NoCriticalPoint or WrongCurvature.
    double operator()(double x, double lambda, double t) const;

    /// ∂H₀/∂u and ∂²H₀/∂u² at a point.
    double dH_du(double x, double u, double lambda, double t) const { return g_(x, u, lambda, 0.0, t); }
    double d2H_du2(double x, double u, double lambda, double t) const { return gu_(x, u, lambda, 0.0, t); }

    /// Symbolic u*(x, p_x, t) when H₀ is quadratic in u.
    const std::optional<Expr>& closed_form() const { return closed_; }
    const Expr& H0() const { return H0_; }

private:
    double newton(double x, double lambda, double t) const;

    Expr H0_;
    std::optional<Expr> closed_;
    NumericExpr closed_num_;
    NumericExpr curvature_;  // ∂²H₀/∂u², constant in u for the closed form
    NumericExpr g_;
    NumericExpr gu_;
};

/// Pointwise evaluation of H₀ and its derivatives along (x, u, λ, t).
class HamiltonianEval {
public:
    explicit HamiltonianEval(const ControlProblem& p);

    double H(double x, double u, double lambda, double t) const { return H_(x, u, lambda, 0.0, t); }
    double f(double x, double u, double t) const { return f_(x, u, 0.0, 0.0, t); }
    double F(double x, double u, double t) const { return F_(x, u, 0.0, 0.0, t); }
    double dH_dx(double x, double u, double lambda, double t) const { return Hx_(x, u, lambda, 0.0, t); }

private:
    NumericExpr H_, f_, F_, Hx_;
};

/// Control law plus Hamiltonian evaluators, built once per problem for inner loops.
class PontryaginSystem {
public:
    explicit PontryaginSystem(const ControlProblem& p) : problem_(p), law_(p), eval_(p) {}

    const ControlProblem& problem() const { return problem_; }
    const ControlLaw& law() const { return law_; }
    const HamiltonianEval& eval() const { return eval_; }

    double reduced_hamiltonian(double x, double lambda, double t) const {
        return eval_.H(x, law_(x, lambda, t), lambda, t);
    }
    std::pair<double, double> rhs(double x, double lambda, double t) const {
        const double u = law_(x, lambda, t);
        return {eval_.f(x, u, t), -eval_.dH_dx(x, u, lambda, t)};
    }

private:
    ControlProblem problem_;
    ControlLaw law_;
    HamiltonianEval eval_;
};

/// H*(x, λ, t) = payoff(x,u*,t) + λ f(x,u*,t).
double reduced_hamiltonian(const ControlProblem& p, double x, double lambda, double t);

/// (ẋ, λ̇) = (f, −∂H₀/∂x) at u*; the ∂u*/∂x term is absent because ∂H₀/∂u = 0.
std::pair<double, double> rhs(const ControlProblem& p, double x, double lambda, double t);

struct Trajectory {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> lambda;
    std::vector<double> u;
    double action = 0.0;

    std::size_t size() const { return t.size(); }
};

struct ShootingConfig {
    double dt = 1e-3;
    double tol = 1e-9;
    int max_iter = 50;
    std::pair<double, double> lambda0_bracket{-10.0, 10.0};

    /// Throws ConfigError.
    void validate() const;
};

/// Number of RK4 steps for a horizon: round(T/dt), at least 1.
int step_count(double t0, double t1, double dt);

/// RK4 on the Pontryagin system from (x0, λ0), N uniform steps; u filled in, action left 0.
Trajectory integrate_costate(const PontryaginSystem& sys, double lambda0, int n_steps);

/// Secant shooting on λ(t0) for λ(t1) = 0. Throws NonConvergence.
Trajectory shoot(const ControlProblem& p, const ShootingConfig& cfg = {});

/// Trapezoid rule for ∫ −λẋ + H dt; ẋ from second-order differences of the x samples.
double action_value(const ControlProblem& p, const Trajectory& traj);

/// State trajectory under a prescribed open-loop control u(t) (RK4, λ left at 0).
Trajectory integrate_control(const ControlProblem& p, const std::function<double(double)>& control, int n_steps);

/// dH*/dx + ∂λ/∂t on the field's grid, with H*(x, λ(x,t), t) differenced in x.
/// Throws GridError for fewer than 3 nodes per axis.
Field2D consistency_residual(const ControlProblem& p, const Field2D& lambda_field);

/// RK4 on ẋ = f(x, u*(x, λ(x,t), t), t) with λ bilinearly interpolated. Throws GridError
/// when the state leaves the field's x-range.
Trajectory closed_loop_integrate(const ControlProblem& p, const Field2D& lambda_field, int n_steps);

}  // namespace dynopt
