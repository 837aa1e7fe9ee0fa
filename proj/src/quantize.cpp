#include "dynopt/quantize.hpp"

#include <cmath>

#include "dynopt/errors.hpp"
#include "dynopt/pontryagin.hpp"

namespace dynopt {

WaveGrid wave_function(const ValueGrid& grid) {
    WaveGrid w{grid.x_axis(), grid.t_axis(), {}};
    w.psi.reserve(grid.J.values().size());
    for (double j : grid.J.values()) w.psi.push_back(std::polar(1.0, j));
    return w;
}

namespace {

void check_geometry(const WaveGrid& wave, const ValueGrid& grid) {
    check_axis(wave.x, 3, "x");
    check_axis(wave.t, 3, "t");
    const auto same = [](const Axis& a, const Axis& b) { return a.lo == b.lo && a.hi == b.hi && a.n == b.n; };
    if (!same(wave.x, grid.x_axis()) || !same(wave.t, grid.t_axis())) {
        throw GridError("wave function and value grid have different geometry");
    }
}

std::complex<double> dpsi_dx(const WaveGrid& w, int i, int j) {
    return (w(i + 1, j) - w(i - 1, j)) / (2 * w.x.step());
}

std::complex<double> dpsi_dt(const WaveGrid& w, int i, int j) {
    return (w(i, j + 1) - w(i, j - 1)) / (2 * w.t.step());
}

}  // namespace

Field2D schrodinger_residual_field(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p) {
    check_geometry(wave, grid);
    const HamiltonianEval ev(p);
    constexpr std::complex<double> I(0.0, 1.0);
    Field2D r(wave.x, wave.t);
    for (int j = 1; j + 1 < wave.t.n; ++j) {
        const double t = wave.t.at(j);
        for (int i = 1; i + 1 < wave.x.n; ++i) {
            const double x = wave.x.at(i);
            const double u = grid.u_star(i, j);
            const std::complex<double> res =
                ev.F(x, u, t) * wave(i, j) - I * ev.f(x, u, t) * dpsi_dx(wave, i, j) - I * dpsi_dt(wave, i, j);
            r(i, j) = std::abs(res);
        }
    }
    return r;
}

double schrodinger_residual(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p, const Window& w) {
    return window_max_abs(schrodinger_residual_field(wave, grid, p), w);
}

ConstraintResidual constraint_residual(const WaveGrid& wave, const ValueGrid& grid, const ControlProblem& p,
                                       const Window& w) {
    check_geometry(wave, grid);
    const Expr payoff = p.payoff();
    const NumericExpr Fu(differentiate(payoff, Var::u)), fu(differentiate(p.f, Var::u));
    constexpr std::complex<double> I(0.0, 1.0);
    Field2D r(wave.x, wave.t);
    for (int j = 0; j < wave.t.n; ++j) {
        const double t = wave.t.at(j);
        for (int i = 1; i + 1 < wave.x.n; ++i) {
            const double x = wave.x.at(i);
            const double u = grid.u_star(i, j);
            r(i, j) = std::abs(Fu(x, u, 0.0, 0.0, t) * wave(i, j) - I * fu(x, u, 0.0, 0.0, t) * dpsi_dx(wave, i, j));
        }
    }
    ConstraintResidual out;
    out.r1 = 0.0;
    out.r2 = window_max_abs(r, w);
    return out;
}

}  // namespace dynopt
