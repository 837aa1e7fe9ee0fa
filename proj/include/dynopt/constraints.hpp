#pragma once

// Dirac analysis of H₀ = F + p_x f on the phase space (x, u, p_x, p_u).
//
// Brackets are the canonical ones of poisson_bracket, so {p_u, B} = −∂B/∂u and
// {Φ₁,Φ₂} = −∂²H₀/∂u². The obstruction α reported by quantization_obstruction
// is ∂²H₀/∂u² itself.

#include <array>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "dynopt/expr.hpp"
#include "dynopt/problem.hpp"

namespace dynopt {

enum class Classification { SecondClass, Degenerate };

std::string_view to_string(Classification c);

using DiracMatrix = std::array<std::array<Expr, 2>, 2>;

struct DiracReport {
    Expr H0;
    Expr Phi1;
    Expr Phi2;
    /// Every constraint the propagation loop produced, starting with Φ₁.
    std::vector<Expr> chain;
    DiracMatrix dirac_matrix;
    Expr det;
    Classification classification = Classification::Degenerate;
    Expr mu1;
    Expr mu2;
    std::map<Var, Expr> eom;
    bool pontryagin_equivalent = false;
    Expr obstruction_alpha;
    /// u on the constraint surface when Φ₂ is affine in u.
    std::optional<Expr> u_on_surface;
};

Expr hamiltonian_h0(const ControlProblem& p);

/// Φ₁ = p_u.
Expr primary_constraint();

/// Generic Dirac propagation: each constraint φ whose preservation does not involve
/// the multiplier of Φ₁ spawns {H₀, φ}. Stops when a candidate vanishes or is
/// proportional to an earlier constraint; throws ConstraintLoopError after max_steps.
std::vector<Expr> constraint_chain(const Expr& H0, int max_steps = 10);

/// Φ₂ = ∂H₀/∂u, after checking that propagation terminates.
Expr propagate(const Expr& H0);

DiracMatrix dirac_matrix(const Expr& Phi1, const Expr& Phi2);

/// Uses H0, Phi2 and dirac_matrix from the partially filled report.
Classification classify(const DiracReport& report);

/// (μ₁, μ₂). Throws DegenerateError when {Φ₁,Φ₂} ≡ 0.
std::pair<Expr, Expr> multipliers(const Expr& H0, const Expr& Phi1, const Expr& Phi2);

Expr dirac_bracket(const Expr& a, const Expr& b, const DiracReport& ctx);

/// {v, H₀}_DB for v in x, p_x, u, p_u.
std::map<Var, Expr> equations_of_motion(const DiracReport& ctx);

/// Exact substitution of the surface (p_u = 0, u = u_on_surface); nullopt when Φ₂ is not affine in u.
std::optional<Expr> reduce_on_surface(const Expr& e, const DiracReport& ctx);

/// Numerically solved point on Φ₂ = 0 for given (x, p_x, t); nullopt when no root is found.
std::optional<double> surface_u(const DiracReport& ctx, double x, double p_x, double t);

bool verify_pontryagin_equivalence(const DiracReport& ctx);

/// α = ∂²H₀/∂u².
Expr quantization_obstruction(const DiracReport& ctx);

/// Full pipeline. Degenerate problems come back with classification = Degenerate and
/// the multiplier, bracket and equivalence fields left empty.
DiracReport analyze(const ControlProblem& p);

}  // namespace dynopt
