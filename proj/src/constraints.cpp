#include "dynopt/constraints.hpp"

#include <cmath>
#include <random>

#include <boost/math/tools/toms748_solve.hpp>

#include "dynopt/errors.hpp"

namespace dynopt {

std::string_view to_string(Sense s) { return s == Sense::maximize ? "maximize" : "minimize"; }

std::string_view to_string(Classification c) {
    return c == Classification::SecondClass ? "SecondClass" : "Degenerate";
}

void ControlProblem::validate() const {
    for (const Expr* e : {&F, &f}) {
        if (e->mentions(Var::p_x) || e->mentions(Var::p_u)) {
            throw ConfigError("F and f may only use x, u and t");
        }
    }
    if (!(t1 > t0)) throw ConfigError("t1 must be greater than t0");
    if (!std::isfinite(t0) || !std::isfinite(t1) || !std::isfinite(x0)) {
        throw ConfigError("t0, t1 and x0 must be finite");
    }
}

Expr hamiltonian_h0(const ControlProblem& p) { return p.payoff() + Expr(Var::p_x) * p.f; }

Expr primary_constraint() { return Var::p_u; }

namespace {

Expr on_primary(const Expr& e) { return substitute(e, Var::p_u, Expr(0)); }

bool proportional(const Expr& a, const Expr& b) {
    if (b.is_zero()) return false;
    return (a / b).is_constant();
}

}  // namespace

std::vector<Expr> constraint_chain(const Expr& H0, int max_steps) {
    const Expr phi1 = primary_constraint();
    std::vector<Expr> chain{phi1};
    for (int step = 0; step < max_steps; ++step) {
        const Expr& last = chain.back();
        // Preservation of `last` fixes the multiplier of Φ₁ once {last, Φ₁} ≠ 0.
        if (chain.size() > 1 && !on_primary(poisson_bracket(last, phi1)).is_zero()) return chain;
        const Expr next = on_primary(poisson_bracket(H0, last));
        if (next.is_zero()) {
            if (chain.size() == 1) chain.push_back(next);
            return chain;
        }
        for (const Expr& earlier : chain) {
            if (proportional(next, earlier)) {
                if (chain.size() == 1) chain.push_back(next);
                return chain;
            }
        }
        chain.push_back(next);
    }
    throw ConstraintLoopError("constraint propagation did not terminate after " + std::to_string(max_steps) +
                              " steps");
}

Expr propagate(const Expr& H0) { return constraint_chain(H0).at(1); }

DiracMatrix dirac_matrix(const Expr& Phi1, const Expr& Phi2) {
    const Expr c = poisson_bracket(Phi1, Phi2);
    return {{{Expr(0), c}, {-c, Expr(0)}}};
}

namespace {

std::optional<Expr> surface_solution(const Expr& Phi2) {
    try {
        if (Phi2.degree(Var::u) != 1) return std::nullopt;
        return solve_affine(Phi2, Var::u);
    } catch (const NotAffine&) {
        return std::nullopt;
    } catch (const DegenerateError&) {
        return std::nullopt;
    }
}

Expr require_second_class(const DiracReport& ctx) {
    const Expr c = poisson_bracket(ctx.Phi1, ctx.Phi2);
    if (c.is_zero()) throw DegenerateError("{Phi1, Phi2} vanishes identically: the second-class condition fails");
    return c;
}

}  // namespace

Classification classify(const DiracReport& report) {
    const Expr curvature = differentiate(differentiate(report.H0, Var::u), Var::u);
    if (curvature.is_zero()) return Classification::Degenerate;
    if (auto u = surface_solution(report.Phi2)) {
        Expr reduced = substitute(on_primary(curvature), Var::u, *u);
        return reduced.is_zero() ? Classification::Degenerate : Classification::SecondClass;
    }
    return Classification::SecondClass;
}

std::pair<Expr, Expr> multipliers(const Expr& H0, const Expr& Phi1, const Expr& Phi2) {
    const Expr c = poisson_bracket(Phi1, Phi2);
    if (c.is_zero()) throw DegenerateError("{Phi1, Phi2} vanishes identically: the second-class condition fails");
    return {poisson_bracket(Phi2, H0) / c, -poisson_bracket(Phi1, H0) / c};
}

Expr dirac_bracket(const Expr& a, const Expr& b, const DiracReport& ctx) {
    const Expr c = require_second_class(ctx);
    const Expr& p1 = ctx.Phi1;
    const Expr& p2 = ctx.Phi2;
    return poisson_bracket(a, b) + poisson_bracket(a, p1) * poisson_bracket(p2, b) / c -
           poisson_bracket(a, p2) * poisson_bracket(p1, b) / c;
}

std::map<Var, Expr> equations_of_motion(const DiracReport& ctx) {
    std::map<Var, Expr> eom;
    for (Var v : {Var::x, Var::p_x, Var::u, Var::p_u}) eom[v] = dirac_bracket(Expr(v), ctx.H0, ctx);
    return eom;
}

std::optional<Expr> reduce_on_surface(const Expr& e, const DiracReport& ctx) {
    if (!ctx.u_on_surface) return std::nullopt;
    return substitute(on_primary(e), Var::u, *ctx.u_on_surface);
}

std::optional<double> surface_u(const DiracReport& ctx, double x, double p_x, double t) {
    const NumericExpr phi(ctx.Phi2);
    auto g = [&](double u) { return phi(x, u, p_x, 0.0, t); };
    const double g0 = g(0.0);
    if (g0 == 0.0) return 0.0;
    // Expand outward from u = 0 until a sign change brackets a root.
    double inner_hi = 0.0, inner_lo = 0.0;
    double g_hi = g0, g_lo = g0;
    for (double r = 0.25; r <= 1e6; r *= 2) {
        const double a = g(r);
        if (std::isfinite(a) && std::signbit(a) != std::signbit(g_hi)) {
            boost::uintmax_t iters = 200;
            auto [lo, hi] = boost::math::tools::toms748_solve(
                g, inner_hi, r, g_hi, a, boost::math::tools::eps_tolerance<double>(52), iters);
            return 0.5 * (lo + hi);
        }
        const double b = g(-r);
        if (std::isfinite(b) && std::signbit(b) != std::signbit(g_lo)) {
            boost::uintmax_t iters = 200;
            auto [lo, hi] = boost::math::tools::toms748_solve(
                g, -r, inner_lo, b, g_lo, boost::math::tools::eps_tolerance<double>(52), iters);
            return 0.5 * (lo + hi);
        }
        inner_hi = r;
        g_hi = a;
        inner_lo = -r;
        g_lo = b;
    }
    return std::nullopt;
}

bool verify_pontryagin_equivalence(const DiracReport& ctx) {
    const Expr c = require_second_class(ctx);
    const Expr dx = dirac_bracket(Var::x, ctx.H0, ctx) - differentiate(ctx.H0, Var::p_x);
    const Expr dpx = dirac_bracket(Var::p_x, ctx.H0, ctx) + differentiate(ctx.H0, Var::x);

    if (ctx.u_on_surface) {
        return reduce_on_surface(dx, ctx)->is_zero() && reduce_on_surface(dpx, ctx)->is_zero();
    }

    // Φ₂ not solvable for u in closed form: sample the surface.
    const NumericExpr ndx(dx), ndpx(dpx), nc(c);
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::uniform_real_distribution<double> time(0.0, 1.0);
    int accepted = 0;
    for (int attempt = 0; attempt < 5000 && accepted < 50; ++attempt) {
        const double x = coord(rng), px = coord(rng), t = time(rng);
        const auto u = surface_u(ctx, x, px, t);
        if (!u) continue;
        if (std::abs(nc(x, *u, px, 0.0, t)) < 1e-3) continue;
        const double r1 = ndx(x, *u, px, 0.0, t);
        const double r2 = ndpx(x, *u, px, 0.0, t);
        if (!(std::abs(r1) <= 1e-10) || !(std::abs(r2) <= 1e-10)) return false;
        ++accepted;
    }
    return accepted == 50;
}

Expr quantization_obstruction(const DiracReport& ctx) {
    return differentiate(differentiate(ctx.H0, Var::u), Var::u);
}

DiracReport analyze(const ControlProblem& p) {
    p.validate();
    DiracReport r;
    r.H0 = hamiltonian_h0(p);
    r.Phi1 = primary_constraint();
    r.chain = constraint_chain(r.H0);
    r.Phi2 = r.chain.at(1);
    r.dirac_matrix = dirac_matrix(r.Phi1, r.Phi2);
    r.det = r.dirac_matrix[0][1] * r.dirac_matrix[0][1];
    r.obstruction_alpha = quantization_obstruction(r);
    r.classification = classify(r);
    if (r.classification == Classification::Degenerate) return r;
    r.u_on_surface = surface_solution(r.Phi2);
    std::tie(r.mu1, r.mu2) = multipliers(r.H0, r.Phi1, r.Phi2);
    r.eom = equations_of_motion(r);
    r.pontryagin_equivalent = verify_pontryagin_equivalence(r);
    return r;
}

}  // namespace dynopt
