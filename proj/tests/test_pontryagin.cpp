#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dynopt/constraints.hpp"
#include "dynopt/errors.hpp"
#include "dynopt/pontryagin.hpp"

using namespace dynopt;

namespace {

ControlProblem make(const char* F, const char* f, double x0 = 1.0) {
    ControlProblem p;
    p.F = parse(F);
    p.f = parse(f);
    p.x0 = x0;
    return p;
}

ControlProblem lq1() { return make("-(x^2+u^2)/2", "u"); }

// Closed-form LQ1 optimum.
double x_exact(double t) { return std::cosh(t - 1) / std::cosh(1.0); }
double l_exact(double t) { return std::sinh(t - 1) / std::cosh(1.0); }

Field2D riccati_lambda(Axis xa, Axis ta) {
    Field2D f(xa, ta);
    for (int j = 0; j < ta.n; ++j) {
        for (int i = 0; i < xa.n; ++i) f(i, j) = -std::tanh(1 - ta.at(j)) * xa.at(i);
    }
    return f;
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sx += xs[k];
        sy += ys[k];
        sxx += xs[k] * xs[k];
        sxy += xs[k] * ys[k];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("control law") {
    const ControlLaw lq(lq1());
    REQUIRE(lq.closed_form().has_value());
    CHECK(*lq.closed_form() == Expr(Var::p_x));
    CHECK(lq(0.3, -0.7, 0.1) == doctest::Approx(-0.7));

    // F = −(a x² + b u²), f = c x + d u with a=2, b=3, c=1/2, d=5 → u* = λ d/(2b).
    const ControlLaw gen(make("-(2*x^2 + 3*u^2)", "x/2 + 5*u"));
    CHECK(*gen.closed_form() == Expr(Rational(5, 6)) * Expr(Var::p_x));

    const ControlLaw wrong(make("u^2", "u"));
    CHECK_THROWS_AS(wrong(0.0, 0.0, 0.0), WrongCurvature);
    CHECK_THROWS_AS(ControlLaw(make("x*u", "x+u")), DegenerateError);

    // Non-quadratic: −u⁴/4 − x²/2, f = u → u* = cbrt(λ) by safeguarded Newton.
    const ControlLaw quartic(make("-u^4/4 - x^2/2", "u"));
    CHECK_FALSE(quartic.closed_form().has_value());
    for (double l : {-3.0, -0.2, 1e-9, 0.5, 7.0}) CHECK(quartic(0.1, l, 0.0) == doctest::Approx(std::cbrt(l)).epsilon(1e-12));
    CHECK(quartic(0.1, 0.0, 0.0) == 0.0);

    // Double well: the origin is a minimum; the law picks a maximizer at ±1.
    const ControlLaw well(make("-u^4 + 2*u^2", "u"));
    CHECK(std::abs(well(0.0, 0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));

    // Convex with no stationary point: exp(u) + λu has dH/du > 0 for λ ≥ 0.
    const ControlLaw none(make("exp(u)", "u"));
    CHECK_THROWS_AS(none(0.0, 1.0, 0.0), NoCriticalPoint);
    CHECK_THROWS_AS(none(0.0, -1.0, 0.0), WrongCurvature);
}

TEST_CASE("reduced hamiltonian") {
    CHECK(reduced_hamiltonian(lq1(), 1.0, 0.0, 0.0) == doctest::Approx(-0.5));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> d(-2, 2);
    for (int k = 0; k < 20; ++k) {
        const double x = d(rng), l = d(rng);
        CHECK(reduced_hamiltonian(lq1(), x, l, 0.3) == doctest::Approx((l * l - x * x) / 2).epsilon(1e-14));
    }
    CHECK(reduced_hamiltonian(make("0", "0"), 0.4, 0.2, 0.1) == 0.0);
}

TEST_CASE("rhs") {
    auto [a, b] = rhs(lq1(), 1.0, 0.0, 0.0);
    CHECK(a == doctest::Approx(0.0));
    CHECK(b == doctest::Approx(1.0));
    std::tie(a, b) = rhs(lq1(), 0.0, 1.0, 0.0);
    CHECK(a == doctest::Approx(1.0));
    CHECK(b == doctest::Approx(0.0));
    std::tie(a, b) = rhs(make("0", "0"), 0.7, -0.2, 0.5);
    CHECK(a == 0.0);
    CHECK(b == 0.0);
}

TEST_CASE("rhs agrees with the Dirac equations of motion on the surface") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> d(-1, 1);
    for (const char* F : {"-(x^2+u^2)/2", "x*u - 2*u^2 + x^3/3", "-u^4 - x^2*u^2 + u*sin(t)"}) {
        const ControlProblem p = make(F, "u + x/3");
        const DiracReport r = analyze(p);
        const NumericExpr ex(r.eom.at(Var::x)), epx(r.eom.at(Var::p_x));
        for (int k = 0; k < 20; ++k) {
            const double x = d(rng), l = d(rng), t = 0.5 * (d(rng) + 1);
            const double u = ControlLaw(p)(x, l, t);
            const auto [dx, dl] = rhs(p, x, l, t);
            CHECK(std::abs(ex(x, u, l, 0.0, t) - dx) <= 1e-12);
            CHECK(std::abs(epx(x, u, l, 0.0, t) - dl) <= 1e-12);
        }
    }
}

TEST_CASE("shoot LQ1") {
    ShootingConfig cfg;
    cfg.dt = 1e-3;
    cfg.tol = 1e-9;
    const Trajectory tr = shoot(lq1(), cfg);
    CHECK(tr.size() == 1001);
    CHECK(std::abs(tr.lambda.front() + std::tanh(1.0)) <= 1e-6);
    CHECK(std::abs(tr.x.back() - 1 / std::cosh(1.0)) <= 1e-6);
    CHECK(std::abs(tr.lambda.back()) <= cfg.tol);
    double err = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        err = std::max(err, std::abs(tr.x[k] - x_exact(tr.t[k])) + std::abs(tr.lambda[k] - l_exact(tr.t[k])));
        CHECK(std::abs(tr.u[k] - tr.lambda[k]) <= 1e-10);  // |∂H/∂u| = |−u + λ|
    }
    CHECK(err <= 1e-8);
    CHECK(std::abs(tr.action + std::tanh(1.0) / 2) <= 1e-5);
}

TEST_CASE("shoot trivial and failing cases") {
    const Trajectory tr = shoot(make("-u^2/2", "u", 0.37));
    for (std::size_t k = 0; k < tr.size(); ++k) {
        CHECK(tr.lambda[k] == 0.0);
        CHECK(tr.u[k] == 0.0);
        CHECK(tr.x[k] == doctest::Approx(0.37));
    }
    ShootingConfig bad;
    bad.lambda0_bracket = {10.0, 11.0};
    CHECK_THROWS_AS(shoot(lq1(), bad), NonConvergence);
    bad.lambda0_bracket = {1.0, 0.0};
    CHECK_THROWS_AS(shoot(lq1(), bad), ConfigError);
    ShootingConfig few;
    few.max_iter = 1;
    CHECK_THROWS_AS(shoot(make("-(x^2+u^2)/2 - x^4/12", "u"), few), NonConvergence);

    const Trajectory zero = shoot(make("0", "0", 2.0));
    CHECK(zero.x.back() == 2.0);
    CHECK(zero.action == 0.0);
}

TEST_CASE("shoot falls back to bisection when a sign change is known") {
    // Strongly nonlinear residual: secant overshoots, the known sign change keeps it inside.
    ShootingConfig cfg;
    cfg.lambda0_bracket = {-3.0, 3.0};
    const Trajectory tr = shoot(make("-(x^2+u^2)/2 - x^4/12", "u", 1.5), cfg);
    CHECK(std::abs(tr.lambda.back()) <= cfg.tol);
}

TEST_CASE("every shot satisfies transversality and pointwise optimality") {
    for (const char* F : {"-(x^2+u^2)/2", "-u^4/4 - x^2/2", "-(x-1)^2 - u^2 + t*u"}) {
        const ControlProblem p = make(F, "u - x/2");
        const Trajectory tr = shoot(p);
        const ControlLaw law(p);
        CHECK(std::abs(tr.lambda.back()) <= 1e-9);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            CHECK(std::abs(law.dH_du(tr.x[k], tr.u[k], tr.lambda[k], tr.t[k])) <= 1e-10);
        }
    }
}

TEST_CASE("autonomous H* conservation") {
    const Trajectory tr = shoot(lq1());
    const PontryaginSystem sys(lq1());
    double drift = 0;
    const double h0 = sys.reduced_hamiltonian(tr.x[0], tr.lambda[0], 0.0);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        drift = std::max(drift, std::abs(sys.reduced_hamiltonian(tr.x[k], tr.lambda[k], tr.t[k]) - h0));
    }
    CHECK(drift <= 1e-8);
}

TEST_CASE("RK4 drift order on a nonlinear autonomous problem") {
    const ControlProblem p = make("-(x^2+u^2)/2 - x^4/12", "u", 1.5);
    const PontryaginSystem sys(p);
    ShootingConfig cfg;
    cfg.lambda0_bracket = {-3.0, 3.0};
    const double l0 = shoot(p, cfg).lambda.front();
    auto drift = [&](int n) {
        const Trajectory tr = integrate_costate(sys, l0, n);
        const double h0 = sys.reduced_hamiltonian(tr.x[0], tr.lambda[0], 0.0);
        double d = 0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            d = std::max(d, std::abs(sys.reduced_hamiltonian(tr.x[k], tr.lambda[k], tr.t[k]) - h0));
        }
        return d;
    };
    const double coarse = drift(20), fine = drift(40);
    MESSAGE("drift ratio " << coarse / fine);
    CHECK(coarse / fine >= 16 * 0.7);
    CHECK(coarse / fine <= 16 * 1.3);
}

TEST_CASE("action value") {
    CHECK(action_value(make("0", "0"), shoot(make("0", "0"))) == 0.0);

    // Stationarity: u = u* + ε sin(πt) lowers the action by O(ε²).
    const ControlProblem p = lq1();
    const int n = 1000;
    const double a0 = integrate_control(p, l_exact, n).action;
    CHECK(std::abs(a0 + std::tanh(1.0) / 2) <= 1e-5);
    std::vector<double> le, ld;
    for (double eps : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
        const double a = integrate_control(p, [&](double t) { return l_exact(t) + eps * std::sin(M_PI * t); }, n).action;
        CHECK(a < a0);
        le.push_back(std::log(eps));
        ld.push_back(std::log(a0 - a));
    }
    CHECK(std::abs(slope(le, ld) - 2.0) <= 0.1);
}

TEST_CASE("action equals the payoff integral along feasible trajectories") {
    const ControlProblem p = make("-(x^2+u^2)/2 + t*x", "u - x");
    const Trajectory tr = shoot(p);
    const HamiltonianEval ev(p);
    double integral = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double w = (k == 0 || k + 1 == tr.size()) ? 0.5 : 1.0;
        integral += w * ev.F(tr.x[k], tr.u[k], tr.t[k]);
    }
    integral *= 1e-3;
    CHECK(std::abs(tr.action - integral) <= 1e-6);
}

TEST_CASE("consistency residual") {
    auto run = [](int nx, int nt) {
        const Field2D f = riccati_lambda({-2, 2, nx}, {0, 1, nt});
        return window_max_abs(consistency_residual(lq1(), f));
    };
    const double r1 = run(41, 41), r2 = run(81, 81);
    CHECK(r1 <= 1e-2);
    const double order = std::log2(r1 / r2);
    MESSAGE("Riccati consistency order " << order);
    CHECK(std::abs(order - 2.0) <= 0.3);

    const Field2D zero(Axis{-1, 1, 5}, Axis{0, 1, 5});
    CHECK(window_max_abs(consistency_residual(make("0", "0"), zero)) == 0.0);

    Field2D wrong(Axis{-2, 2, 81}, Axis{0, 1, 81});
    // λ = −x/2: dH*/dx = (1/4 − 1)x, λ_t = 0.
    for (int j = 0; j < wrong.nt(); ++j) {
        for (int i = 0; i < wrong.nx(); ++i) wrong(i, j) = -0.5 * wrong.x_axis().at(i);
    }
    CHECK(window_max_abs(consistency_residual(lq1(), wrong)) >= 0.5);

    CHECK_THROWS_AS(consistency_residual(lq1(), Field2D(Axis{-1, 1, 2}, Axis{0, 1, 5})), GridError);
}

TEST_CASE("closed loop integration") {
    const Field2D f = riccati_lambda({-2, 2, 401}, {0, 1, 401});
    const Trajectory cl = closed_loop_integrate(lq1(), f, 1000);
    CHECK(std::abs(cl.x.back() - 1 / std::cosh(1.0)) <= 1e-4);
    const Trajectory sh = shoot(lq1());
    double dx = 0;
    for (std::size_t k = 0; k < cl.size(); ++k) dx = std::max(dx, std::abs(cl.x[k] - sh.x[k]));
    CHECK(dx <= 1e-3);

    const Field2D zero(Axis{-3, 3, 11}, Axis{0, 1, 11});
    const Trajectory still = closed_loop_integrate(make("0", "0", 0.8), zero, 50);
    for (double x : still.x) CHECK(x == 0.8);

    const Field2D narrow = riccati_lambda({-0.5, 0.5, 11}, {0, 1, 11});
    CHECK_THROWS_AS(closed_loop_integrate(lq1(), narrow, 100), GridError);
}
