#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dynopt/constraints.hpp"
#include "dynopt/errors.hpp"
#include "generators.hpp"

using namespace dynopt;

namespace {

const Expr x = Var::x;
const Expr u = Var::u;
const Expr px = Var::p_x;
const Expr pu = Var::p_u;

ControlProblem make(const char* F, const char* f) {
    ControlProblem p;
    p.F = parse(F);
    p.f = parse(f);
    p.x0 = 1.0;
    return p;
}

ControlProblem lq1() { return make("-(x^2+u^2)/2", "u"); }

/// F = a x² + b x u + c u² + d x + e u + g t u, f = h x + k u + m with c ≠ 0.
ControlProblem random_quadratic(std::mt19937_64& rng) {
    auto r = [&] { return Expr(testing::random_rational(rng)); };
    Expr c = r();
    while (c.is_zero()) c = r();
    Expr k = r();
    ControlProblem p;
    p.F = r() * x * x + r() * x * u + c * u * u + r() * x + r() * u + r() * Expr(Var::t) * u;
    p.f = r() * x + k * u + r();
    return p;
}

}  // namespace

TEST_CASE("hamiltonian_h0") {
    CHECK(hamiltonian_h0(lq1()) == parse("-(x^2+u^2)/2") + px * u);
    CHECK(hamiltonian_h0(make("0", "0")).is_zero());
    CHECK(hamiltonian_h0(make("x*u", "x+u")) == x * u + px * x + px * u);
    ControlProblem m = lq1();
    m.sense = Sense::minimize;
    CHECK(hamiltonian_h0(m) == parse("(x^2+u^2)/2") + px * u);
}

TEST_CASE("problem validation") {
    ControlProblem p = lq1();
    p.F = p.F + px;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = lq1();
    p.t1 = p.t0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("primary constraint") {
    CHECK(primary_constraint() == pu);
    CHECK(poisson_bracket(primary_constraint(), u) == Expr(-1));
    CHECK(poisson_bracket(primary_constraint(), x).is_zero());
}

TEST_CASE("propagate") {
    CHECK(propagate(hamiltonian_h0(lq1())) == -u + px);
    CHECK(propagate(Expr(0)).is_zero());
    CHECK(propagate(x * u + px * (x + u)) == x + px);
    CHECK(constraint_chain(hamiltonian_h0(lq1())).size() == 2);
    // Singular chain: x + p_x spawns further constraints until one involves u.
    const auto chain = constraint_chain(x * u + px * (x + u));
    CHECK(chain.size() == 4);
    CHECK(chain[2] == px - x);
}

TEST_CASE("dirac matrix and classification") {
    const DiracReport r = analyze(lq1());
    CHECK(r.dirac_matrix[0][0].is_zero());
    CHECK(r.dirac_matrix[1][1].is_zero());
    CHECK(r.dirac_matrix[1][0] == -r.dirac_matrix[0][1]);
    // Canonical brackets: {p_u, -u + p_x} = 1 = -∂²H₀/∂u².
    CHECK(r.dirac_matrix[0][1] == Expr(1));
    CHECK(r.det == Expr(1));
    CHECK(r.classification == Classification::SecondClass);
    CHECK(r.pontryagin_equivalent);

    CHECK(analyze(make("x*u", "x+u")).classification == Classification::Degenerate);
    CHECK(analyze(make("0", "0")).classification == Classification::Degenerate);
    const DiracReport lin = analyze(make("x*u", "x+u"));
    CHECK(lin.dirac_matrix[0][1].is_zero());

    const DiracReport quartic = analyze(make("-u^4", "u"));
    CHECK(quartic.Phi2 == Expr(-4) * u.pow(3) + px);
    CHECK(quartic.classification == Classification::SecondClass);
    CHECK_FALSE(quartic.u_on_surface.has_value());
}

TEST_CASE("multipliers") {
    const DiracReport r = analyze(lq1());
    CHECK(poisson_bracket(r.Phi1, r.H0) == -r.Phi2);
    CHECK(r.mu2 == r.Phi2);  // −{Φ₁,H₀}/{Φ₁,Φ₂} = Φ₂/1
    CHECK(reduce_on_surface(r.mu2, r)->is_zero());
    CHECK(r.mu1 == poisson_bracket(-u + px, r.H0));
    CHECK_THROWS_AS(multipliers(x * u, pu, x), DegenerateError);
    // Preservation of both constraints under H_T = H₀ + μ₁Φ₁ + μ₂Φ₂.
    const Expr HT = r.H0 + r.mu1 * r.Phi1 + r.mu2 * r.Phi2;
    CHECK(reduce_on_surface(poisson_bracket(r.Phi1, HT), r)->is_zero());
    CHECK(reduce_on_surface(poisson_bracket(r.Phi2, HT), r)->is_zero());
}

TEST_CASE("dirac bracket") {
    const DiracReport r = analyze(lq1());
    CHECK(dirac_bracket(r.Phi1, r.Phi2, r).is_zero());
    CHECK(dirac_bracket(x, px, r) == Expr(1));
    CHECK(reduce_on_surface(dirac_bracket(u, r.Phi1, r), r)->is_zero());
    CHECK_THROWS_AS(dirac_bracket(x, px, analyze(make("x*u", "x+u"))), DegenerateError);
}

TEST_CASE("equations of motion for LQ1") {
    const DiracReport r = analyze(lq1());
    CHECK(*reduce_on_surface(r.eom.at(Var::x), r) == px);
    CHECK(*reduce_on_surface(u - r.eom.at(Var::x), r) == Expr(0));
    CHECK(r.eom.at(Var::p_x) == x);
    CHECK(reduce_on_surface(r.eom.at(Var::p_u), r)->is_zero());
    CHECK(r.eom.at(Var::u) == x);
}

TEST_CASE("equivalence on named problems") {
    CHECK(analyze(make("x*u^2", "x+u")).pontryagin_equivalent);
    const DiracReport quartic = analyze(make("-u^4", "u"));
    CHECK(quartic.pontryagin_equivalent);
    CHECK(analyze(make("-u^4 - x^2*u^2 + exp(-t)*u", "u + x/3")).pontryagin_equivalent);
    CHECK(analyze(make("-(x^2+u^2)/2 + sin(t)*u", "u*(1+x^2)")).pontryagin_equivalent);
}

TEST_CASE("sampled surface points satisfy the secondary constraint") {
    const DiracReport quartic = analyze(make("-u^4", "u"));
    const auto uq = surface_u(quartic, 0.3, 0.5, 0.0);
    REQUIRE(uq.has_value());
    CHECK(*uq == doctest::Approx(std::cbrt(0.5 / 4.0)).epsilon(1e-14));
}

TEST_CASE("quantization obstruction") {
    CHECK(analyze(lq1()).obstruction_alpha == Expr(-1));
    CHECK(analyze(make("x*u", "x+u")).obstruction_alpha.is_zero());
    CHECK(analyze(make("-u^4", "u")).obstruction_alpha == Expr(-12) * u * u);
}

TEST_CASE("random quadratic problems: equivalence, det identity, constraint brackets vanish") {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 25; ++k) {
        const ControlProblem p = random_quadratic(rng);
        const DiracReport r = analyze(p);
        REQUIRE(r.classification == Classification::SecondClass);
        REQUIRE(r.u_on_surface.has_value());
        CHECK(r.pontryagin_equivalent);
        CHECK(r.det == poisson_bracket(r.Phi1, r.Phi2).pow(2));
        for (int j = 0; j < 4; ++j) {
            const Expr a = testing::random_polynomial(rng);
            CHECK(reduce_on_surface(dirac_bracket(r.Phi1, a, r), r)->is_zero());
            CHECK(reduce_on_surface(dirac_bracket(r.Phi2, a, r), r)->is_zero());
        }
    }
}

TEST_CASE("dirac bracket antisymmetry and Leibniz") {
    std::mt19937_64 rng(22);
    const DiracReport r = analyze(lq1());
    const DiracReport q = analyze(make("x*u^2 - u^2", "x+u"));
    for (const DiracReport* ctx : {&r, &q}) {
        for (int k = 0; k < 20; ++k) {
            const Expr a = testing::random_polynomial(rng);
            const Expr b = testing::random_polynomial(rng);
            const Expr c = testing::random_polynomial(rng);
            CHECK((dirac_bracket(a, b, *ctx) + dirac_bracket(b, a, *ctx)).is_zero());
            CHECK(dirac_bracket(a, b * c, *ctx) ==
                  dirac_bracket(a, b, *ctx) * c + b * dirac_bracket(a, c, *ctx));
        }
    }
}

TEST_CASE("classification invariant under rescaling") {
    std::mt19937_64 rng(23);
    const ControlProblem named[] = {lq1(), make("x*u", "x+u"), make("-u^4", "u"), make("x*u^2", "x+u"),
                                    make("0", "0")};
    for (const ControlProblem& base : named) {
        for (int k = 0; k < 4; ++k) {
            Rational c = testing::random_rational(rng);
            if (c == 0) c = 3;
            ControlProblem scaled = base;
            scaled.F = Expr(c) * base.F;
            scaled.f = Expr(c) * base.f;
            CHECK(analyze(scaled).classification == analyze(base).classification);
        }
    }
}
