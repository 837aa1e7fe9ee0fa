#include "dynopt/pontryagin.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "dynopt/constraints.hpp"
#include "dynopt/errors.hpp"

namespace dynopt {

ControlLaw::ControlLaw(const ControlProblem& p) : H0_(hamiltonian_h0(p)) {
    int deg = -1;
    try {
        deg = H0_.degree(Var::u);
    } catch (const NotAffine&) {
        deg = -1;  // u inside a function or denominator
    }
    const Expr g = differentiate(H0_, Var::u);
    if (g.is_zero()) {
        // H0 does not involve u: every control is optimal and u = 0 is used.
        closed_ = Expr(0);
        closed_num_ = NumericExpr(Expr(0));
        curvature_ = NumericExpr(Expr(-1));
        g_ = gu_ = NumericExpr(Expr(0));
        return;
    }
    if (deg == 1) throw DegenerateError("H0 is linear in u: the second-class condition fails");
    const Expr gu = differentiate(g, Var::u);
    if (gu.is_zero()) throw DegenerateError("H0 is linear in u: the second-class condition fails");
    g_ = NumericExpr(g);
    gu_ = NumericExpr(gu);
    curvature_ = NumericExpr(gu);
    if (deg == 2) {
        closed_ = solve_affine(g, Var::u);
        closed_num_ = NumericExpr(*closed_);
    }
}

double ControlLaw::operator()(double x, double lambda, double t) const {
    if (closed_) {
        const double c = curvature_(x, 0.0, lambda, 0.0, t);
        if (!(c < 0.0)) {
            throw WrongCurvature("H0 is not concave in u at x=" + std::to_string(x) + ", t=" + std::to_string(t) +
                                 " (d2H0/du2 = " + std::to_string(c) + "): no maximizing control");
        }
        return closed_num_(x, 0.0, lambda, 0.0, t);
    }
    return newton(x, lambda, t);
}

namespace {

// Newton iteration kept inside [lo, hi] where g(lo), g(hi) differ in sign; falls back
// to bisection when a step leaves the bracket or stalls.
template <class G, class Gp>
double safeguarded_newton(G g, Gp gp, double lo, double hi, double g_lo, int max_iter = 100) {
    if (g_lo > 0) std::swap(lo, hi);  // orient so that g(lo) < 0 < g(hi)
    double u = 0.5 * (lo + hi);
    if ((lo <= 0.0 && 0.0 <= hi) || (hi <= 0.0 && 0.0 <= lo)) u = 0.0;
    double dx_old = std::abs(hi - lo), dx = dx_old;
    double gu = g(u), du = gp(u);
    for (int it = 0; it < max_iter; ++it) {
        const bool outside = ((u - hi) * du - gu) * ((u - lo) * du - gu) > 0.0;
        if (outside || std::abs(2.0 * gu) > std::abs(dx_old * du)) {
            dx_old = dx;
            dx = 0.5 * (hi - lo);
            u = lo + dx;
        } else {
            dx_old = dx;
            dx = gu / du;
            u -= dx;
        }
        if (std::abs(dx) <= 1e-15 * (1.0 + std::abs(u))) break;
        gu = g(u);
        du = gp(u);
        if (gu == 0.0) break;
        if (gu < 0.0) {
            lo = u;
        } else {
            hi = u;
        }
    }
    return u;
}

}  // namespace

double ControlLaw::newton(double x, double lambda, double t) const {
    auto g = [&](double u) { return g_(x, u, lambda, 0.0, t); };
    auto gp = [&](double u) { return gu_(x, u, lambda, 0.0, t); };
    bool saw_root = false;
    auto accept = [&](double u) {
        saw_root = true;
        return gp(u) <= 1e-12;
    };
    auto try_bracket = [&](double a, double b, double ga, double gb, double& out) {
        if (!std::isfinite(ga) || !std::isfinite(gb)) return false;
        if (gb == 0.0) {
            out = b;
        } else if (std::signbit(ga) == std::signbit(gb) || ga == 0.0) {
            return false;
        } else {
            out = safeguarded_newton(g, gp, a, b, ga);
        }
        return accept(out);
    };

    double g_hi = g(0.0), g_lo = g_hi;
    if (g_hi == 0.0 && accept(0.0)) return 0.0;
    double in_hi = 0.0, in_lo = 0.0, u = 0.0;
    // Widen symmetric brackets around u = 0; roots nearest the origin are tried first.
    for (double r = 0.25; r <= 1e6; r *= 2) {
        const double a = g(r);
        if (try_bracket(in_hi, r, g_hi, a, u)) return u;
        const double b = g(-r);
        if (try_bracket(in_lo, -r, g_lo, b, u)) return u;
        in_hi = r;
        g_hi = a;
        in_lo = -r;
        g_lo = b;
    }
    if (saw_root) {
        throw WrongCurvature("no critical point of H0 in u is a maximum at x=" + std::to_string(x) +
                             ", lambda=" + std::to_string(lambda));
    }
    throw NoCriticalPoint("dH0/du has no root in [-1e6, 1e6] at x=" + std::to_string(x) +
                          ", lambda=" + std::to_string(lambda));
}

HamiltonianEval::HamiltonianEval(const ControlProblem& p) {
    const Expr H = hamiltonian_h0(p);
    H_ = NumericExpr(H);
    f_ = NumericExpr(p.f);
    F_ = NumericExpr(p.payoff());
    Hx_ = NumericExpr(differentiate(H, Var::x));
}

double reduced_hamiltonian(const ControlProblem& p, double x, double lambda, double t) {
    return PontryaginSystem(p).reduced_hamiltonian(x, lambda, t);
}

std::pair<double, double> rhs(const ControlProblem& p, double x, double lambda, double t) {
    return PontryaginSystem(p).rhs(x, lambda, t);
}

void ShootingConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("shooting dt must be positive");
    if (!(tol > 0.0)) throw ConfigError("shooting tol must be positive");
    if (max_iter < 1) throw ConfigError("shooting max_iter must be at least 1");
    if (!(lambda0_bracket.first < lambda0_bracket.second)) {
        throw ConfigError("lambda0_bracket must satisfy lo < hi");
    }
}

int step_count(double t0, double t1, double dt) {
    const double n = std::round((t1 - t0) / dt);
    if (!(n < 1e8)) throw ConfigError("time step too small for the horizon");
    return std::max(1, static_cast<int>(n));
}

Trajectory integrate_costate(const PontryaginSystem& sys, double lambda0, int n_steps) {
    const ControlProblem& p = sys.problem();
    const double h = (p.t1 - p.t0) / n_steps;
    Trajectory tr;
    const auto n = static_cast<std::size_t>(n_steps) + 1;
    tr.t.resize(n);
    tr.x.resize(n);
    tr.lambda.resize(n);
    tr.u.resize(n);
    double x = p.x0, l = lambda0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = k + 1 == n ? p.t1 : p.t0 + static_cast<double>(k) * h;
        tr.t[k] = t;
        tr.x[k] = x;
        tr.lambda[k] = l;
        if (k + 1 == n) break;
        const auto [a1, b1] = sys.rhs(x, l, t);
        const auto [a2, b2] = sys.rhs(x + 0.5 * h * a1, l + 0.5 * h * b1, t + 0.5 * h);
        const auto [a3, b3] = sys.rhs(x + 0.5 * h * a2, l + 0.5 * h * b2, t + 0.5 * h);
        const auto [a4, b4] = sys.rhs(x + h * a3, l + h * b3, t + h);
        x += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
        l += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
        if (!std::isfinite(x) || !std::isfinite(l)) {
            for (std::size_t r = k + 1; r < n; ++r) {
                tr.t[r] = p.t0 + static_cast<double>(r) * h;
                tr.x[r] = tr.lambda[r] = tr.u[r] = std::nan("");
            }
            return tr;
        }
    }
    for (std::size_t k = 0; k < n; ++k) tr.u[k] = sys.law()(tr.x[k], tr.lambda[k], tr.t[k]);
    return tr;
}

Trajectory shoot(const ControlProblem& p, const ShootingConfig& cfg) {
    cfg.validate();
    p.validate();
    const PontryaginSystem sys(p);
    const int n = step_count(p.t0, p.t1, cfg.dt);
    auto run = [&](double l0) { return integrate_costate(sys, l0, n); };

    const auto [lo, hi] = cfg.lambda0_bracket;
    Trajectory ta = run(lo), tb = run(hi);
    double a = lo, b = hi;
    double ra = ta.lambda.back(), rb = tb.lambda.back();

    // Known sign change [s_lo, s_hi], used when a secant step leaves the bracket.
    bool have_sign = std::isfinite(ra) && std::isfinite(rb) && std::signbit(ra) != std::signbit(rb);
    double s_lo = lo, s_hi = hi, r_slo = ra;

    auto finish = [&](Trajectory tr) {
        if (!(std::abs(tr.lambda.back()) <= cfg.tol)) {
            throw NonConvergence("transversality residual above tolerance");
        }
        tr.action = action_value(p, tr);
        return tr;
    };
    if (std::abs(ra) <= cfg.tol) return finish(std::move(ta));
    if (std::abs(rb) <= cfg.tol) return finish(std::move(tb));

    for (int it = 0; it < cfg.max_iter; ++it) {
        double c = std::nan("");
        if (std::isfinite(ra) && std::isfinite(rb) && rb != ra) c = b - rb * (b - a) / (rb - ra);
        if (!(std::isfinite(c) && c >= lo && c <= hi)) {
            if (!have_sign) {
                throw NonConvergence("secant step for lambda(t0) left the bracket [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "] and no sign change of lambda(t1) is known");
            }
            c = 0.5 * (s_lo + s_hi);
        }
        Trajectory tc = run(c);
        const double rc = tc.lambda.back();
        if (std::abs(rc) <= cfg.tol) return finish(std::move(tc));
        if (have_sign && std::isfinite(rc)) {
            if (std::signbit(rc) == std::signbit(r_slo)) {
                s_lo = c;
                r_slo = rc;
            } else {
                s_hi = c;
            }
        }
        a = b;
        ra = rb;
        b = c;
        rb = rc;
    }
    throw NonConvergence("shooting did not reach |lambda(t1)| <= " + std::to_string(cfg.tol) + " in " +
                         std::to_string(cfg.max_iter) + " iterations");
}

namespace {

std::vector<double> derivative_samples(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    const double h = (t.back() - t.front()) / static_cast<double>(n - 1);
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / h;
        return d;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2 * h);
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h);
    d[n - 1] = (3 * y[n - 1] - 4 * y[n - 2] + y[n - 3]) / (2 * h);
    return d;
}

}  // namespace

double action_value(const ControlProblem& p, const Trajectory& traj) {
    const std::size_t n = traj.size();
    if (n < 2) return 0.0;
    const HamiltonianEval ev(p);
    const std::vector<double> xdot = derivative_samples(traj.t, traj.x);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double integrand =
            -traj.lambda[k] * xdot[k] + ev.H(traj.x[k], traj.u[k], traj.lambda[k], traj.t[k]);
        sum += (k == 0 || k + 1 == n) ? 0.5 * integrand : integrand;
    }
    return sum * (traj.t.back() - traj.t.front()) / static_cast<double>(n - 1);
}

Trajectory integrate_control(const ControlProblem& p, const std::function<double(double)>& control, int n_steps) {
    const HamiltonianEval ev(p);
    const double h = (p.t1 - p.t0) / n_steps;
    const auto n = static_cast<std::size_t>(n_steps) + 1;
    Trajectory tr;
    tr.t.resize(n);
    tr.x.resize(n);
    tr.u.resize(n);
    tr.lambda.assign(n, 0.0);
    auto xdot = [&](double x, double t) { return ev.f(x, control(t), t); };
    double x = p.x0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = k + 1 == n ? p.t1 : p.t0 + static_cast<double>(k) * h;
        tr.t[k] = t;
        tr.x[k] = x;
        tr.u[k] = control(t);
        if (k + 1 == n) break;
        const double k1 = xdot(x, t);
        const double k2 = xdot(x + 0.5 * h * k1, t + 0.5 * h);
        const double k3 = xdot(x + 0.5 * h * k2, t + 0.5 * h);
        const double k4 = xdot(x + h * k3, t + h);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    tr.action = action_value(p, tr);
    return tr;
}

Field2D consistency_residual(const ControlProblem& p, const Field2D& lambda_field) {
    check_axis(lambda_field.x_axis(), 3, "x");
    check_axis(lambda_field.t_axis(), 3, "t");
    const PontryaginSystem sys(p);
    Field2D hstar(lambda_field.x_axis(), lambda_field.t_axis());
    for (int j = 0; j < hstar.nt(); ++j) {
        const double t = hstar.t_axis().at(j);
        for (int i = 0; i < hstar.nx(); ++i) {
            hstar(i, j) = sys.reduced_hamiltonian(hstar.x_axis().at(i), lambda_field(i, j), t);
        }
    }
    Field2D r = hstar.d_dx();
    const Field2D lt = lambda_field.d_dt();
    for (int j = 0; j < r.nt(); ++j) {
        for (int i = 0; i < r.nx(); ++i) r(i, j) += lt(i, j);
    }
    return r;
}

Trajectory closed_loop_integrate(const ControlProblem& p, const Field2D& lambda_field, int n_steps) {
    const PontryaginSystem sys(p);
    const double h = (p.t1 - p.t0) / n_steps;
    auto xdot = [&](double x, double t) {
        const double l = lambda_field.interpolate(x, t);
        return sys.eval().f(x, sys.law()(x, l, t), t);
    };
    const auto n = static_cast<std::size_t>(n_steps) + 1;
    Trajectory tr;
    tr.t.resize(n);
    tr.x.resize(n);
    tr.lambda.resize(n);
    tr.u.resize(n);
    double x = p.x0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = k + 1 == n ? p.t1 : p.t0 + static_cast<double>(k) * h;
        tr.t[k] = t;
        tr.x[k] = x;
        tr.lambda[k] = lambda_field.interpolate(x, t);
        tr.u[k] = sys.law()(x, tr.lambda[k], t);
        if (k + 1 == n) break;
        const double k1 = xdot(x, t);
        const double k2 = xdot(x + 0.5 * h * k1, t + 0.5 * h);
        const double k3 = xdot(x + 0.5 * h * k2, t + 0.5 * h);
        const double k4 = xdot(x + h * k3, t + h);
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    tr.action = action_value(p, tr);
    return tr;
}

}  // namespace dynopt
