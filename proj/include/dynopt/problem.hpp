#pragma once

#include <string>

#include "dynopt/expr.hpp"

namespace dynopt {

enum class Sense { maximize, minimize };

std::string_view to_string(Sense s);

/// max (or min) ∫ F(x,u,t) dt subject to ẋ = f(x,u,t), x(t0) = x0, free x(t1).
struct ControlProblem {
    Expr F;
    Expr f;
    double t0 = 0.0;
    double t1 = 1.0;
    double x0 = 0.0;
    Sense sense = Sense::maximize;

    /// Throws ConfigError when F or f mention a momentum or t1 <= t0.
    void validate() const;

    /// The running payoff of the equivalent maximization problem (−F when minimizing).
    Expr payoff() const { return sense == Sense::maximize ? F : -F; }
};

}  // namespace dynopt
