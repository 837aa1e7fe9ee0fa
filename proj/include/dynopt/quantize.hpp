#pragma once

// Residual checks for Ψ = e^{iJ} (ħ = 1) against the right-ordered Schrödinger
// equation i ∂Ψ/∂t = F Ψ − i f ∂Ψ/∂x and the operator constraints. The
// obstruction α = ∂²H₀/∂u² (constraints module) is reported alongside but never
// changes these numbers.

#include <complex>
#include <vector>

#include "dynopt/bellman.hpp"
#include "dynopt/grid.hpp"
#include "dynopt/problem.hpp"

namespace dynopt {

struct WaveGrid {
    Axis x;
    Axis t;
    std::vector<std::complex<double>> psi;  ///< row-major over (t, x), as Field2D

    std::complex<double> operator()(int i, int j) const {
        return psi[static_cast<std::size_t>(j) * static_cast<std::size_t>(x.n) + static_cast<std::size_t>(i)];
    }
};

WaveGrid wave_function(const ValueGrid& grid);

/// |(F Ψ − i f ∂Ψ/∂x) − i ∂Ψ/∂t| at u = u_star, central differences; zero off the interior.
/// Throws GridError for fewer than 3 nodes per axis or mismatched geometry.
Field2D schrodinger_residual_field(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p);

/// Window max of schrodinger_residual_field.
double schrodinger_residual(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p,
                            const Window& w = {});

struct ConstraintResidual {
    /// Φ̂₁ = −i ∂/∂u annihilates Ψ: a WaveGrid has no u axis, so this is exactly 0.
    double r1 = 0.0;
    /// Window max of |(∂F/∂u − i ∂f/∂u ∂/∂x) Ψ| at u = u_star.
    double r2 = 0.0;
};

ConstraintResidual constraint_residual(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p,
                                       const Window& w = {});

}  // namespace dynopt
