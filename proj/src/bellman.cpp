#include "dynopt/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dynopt/errors.hpp"
#include "dynopt/pontryagin.hpp"

namespace dynopt {

void BellmanConfig::validate() const {
    check_axis(Axis{xmin, xmax, nx}, 3, "x");
    if (nt < 2) throw GridError("t axis needs at least 2 nodes");
    if (max_substeps < 1) throw ConfigError("max_substeps must be at least 1");
    if (control_bounds && !(control_bounds->first < control_bounds->second)) {
        throw ConfigError("control bounds need umin < umax");
    }
    if (salvage && (salvage->mentions(Var::u) || salvage->mentions(Var::p_x) || salvage->mentions(Var::p_u))) {
        throw ConfigError("salvage may only use x and t");
    }
}

namespace {

// max_u (F + p f) at one node, its slope in p (= f at the maximizer) and the maximizer.
class NodeHamiltonian {
public:
    NodeHamiltonian(const ControlProblem& p, const std::optional<std::pair<double, double>>& bounds)
        : sys_(p), bounds_(bounds) {
        if (sys_.law().closed_form()) bounds_.reset();
    }

    struct Value {
        double H;
        double Hp;
        double u;
    };

    Value operator()(double x, double p, double t) const {
        const double u = bounds_ ? golden(x, p, t) : sys_.law()(x, p, t);
        return {sys_.eval().H(x, u, p, t), sys_.eval().f(x, u, t), u};
    }

    double maximizer(double x, double p, double t) const { return (*this)(x, p, t).u; }

    const PontryaginSystem& system() const { return sys_; }

private:
    double golden(double x, double p, double t) const {
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = bounds_->first, b = bounds_->second;
        auto h = [&](double u) { return sys_.eval().H(x, u, p, t); };
        double c = b - r * (b - a), d = a + r * (b - a);
        double hc = h(c), hd = h(d);
        while (b - a > 1e-10) {
            if (hc >= hd) {
                b = d;
                d = c;
                hd = hc;
                c = b - r * (b - a);
                hc = h(c);
            } else {
                a = c;
                c = d;
                hc = hd;
                d = a + r * (b - a);
                hd = h(d);
            }
        }
        return 0.5 * (a + b);
    }

    PontryaginSystem sys_;
    std::optional<std::pair<double, double>> bounds_;
};

struct Flux {
    double H;
    double speed;
};

// Slope p₀ in [lo, hi] where H'(p) = f changes sign from − to +.
double sonic_slope(const NodeHamiltonian& ham, double x, double t, double lo, double hi) {
    for (int k = 0; k < 100 && hi - lo > 1e-15 * (1 + std::abs(lo) + std::abs(hi)); ++k) {
        const double mid = 0.5 * (lo + hi);
        if (ham(x, mid, t).Hp < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Godunov flux for the convex p ↦ H(p) given backward and forward slopes.
Flux godunov(const NodeHamiltonian& ham, double x, double t, double pB, double pF) {
    const auto b = ham(x, pB, t);
    const auto f = ham(x, pF, t);
    const double speed = std::max(std::abs(b.Hp), std::abs(f.Hp));
    if (pB <= pF) return {std::max(b.H, f.H), speed};
    if (f.Hp >= 0.0) return {f.H, speed};
    if (b.Hp <= 0.0) return {b.H, speed};
    return {ham(x, sonic_slope(ham, x, t, pF, pB), t).H, speed};
}

// Edge flux with a single one-sided slope p. The missing neighbour is treated as an
// unbounded slope: outflow edges use H(p); inflow edges use the sonic value min H,
// which does not depend on the interior and keeps the update monotone.
Flux edge_flux(const NodeHamiltonian& ham, double x, double t, double p, bool left) {
    const auto v = ham(x, p, t);
    const double speed = std::abs(v.Hp);
    if (left ? v.Hp >= 0.0 : v.Hp <= 0.0) return {v.H, speed};
    // Walk away from p until H' changes sign, then bisect.
    double step = 1.0 + std::abs(p);
    for (int k = 0; k < 60; ++k, step *= 2) {
        const double q = left ? p + step : p - step;
        const double hq = ham(x, q, t).Hp;
        if (left ? hq >= 0.0 : hq <= 0.0) {
            const double p0 = left ? sonic_slope(ham, x, t, p, q) : sonic_slope(ham, x, t, q, p);
            return {ham(x, p0, t).H, speed};
        }
    }
    return {v.H, speed};
}

struct StepResult {
    bool accepted;
    double speed;
};

// One explicit step of length h from J (time t) to t − h. Rejected, with J untouched,
// when h · max speed exceeds dx.
StepResult explicit_step(const NodeHamiltonian& ham, const Axis& xa, std::vector<double>& J, double t, double h,
                     std::vector<double>& scratch) {
    const int n = xa.n;
    const double dx = xa.step();
    double speed = 0.0;
    scratch.resize(J.size());
    for (int i = 0; i < n; ++i) {
        const double x = xa.at(i);
        const auto k = static_cast<std::size_t>(i);
        Flux fl{};
        if (i == 0) {
            fl = edge_flux(ham, x, t, (J[1] - J[0]) / dx, true);
        } else if (i == n - 1) {
            fl = edge_flux(ham, x, t, (J[k] - J[k - 1]) / dx, false);
        } else {
            fl = godunov(ham, x, t, (J[k] - J[k - 1]) / dx, (J[k + 1] - J[k]) / dx);
        }
        speed = std::max(speed, fl.speed);
        scratch[k] = J[k] + h * fl.H;
    }
    if (speed * h > dx * (1 + 1e-12)) return {false, speed};
    J.swap(scratch);
    return {true, speed};
}

struct Exceeded {
    double speed;
};

// Backward sweep; throws Exceeded when an interval would need more than `cap` steps.
Field2D sweep(const NodeHamiltonian& ham, const ControlProblem& p, const BellmanConfig& cfg, long cap, CflStats& stats) {
    const Axis xa{cfg.xmin, cfg.xmax, cfg.nx};
    const Axis ta{p.t0, p.t1, cfg.nt};
    Field2D Jf(xa, ta);
    std::vector<double> J(static_cast<std::size_t>(xa.n), 0.0), saved, scratch;
    if (cfg.salvage) {
        const NumericExpr s(*cfg.salvage);
        for (int i = 0; i < xa.n; ++i) J[static_cast<std::size_t>(i)] = s(xa.at(i), 0.0, 0.0, 0.0, p.t1);
    }
    for (int i = 0; i < xa.n; ++i) Jf(i, ta.n - 1) = J[static_cast<std::size_t>(i)];

    const double dx = xa.step();
    const double dt_out = ta.step();
    long m = 1;
    for (int j = ta.n - 2; j >= 0; --j) {
        saved = J;
        for (;;) {
            const double h = dt_out / static_cast<double>(m);
            bool ok = true;
            double t = ta.at(j + 1);
            for (long s = 0; s < m; ++s) {
                const StepResult r = explicit_step(ham, xa, J, t, h, scratch);
                stats.max_speed = std::max(stats.max_speed, r.speed);
                if (!r.accepted) {
                    // Too fast for this step size: widen m and redo the interval.
                    const long need = static_cast<long>(std::ceil(dt_out * r.speed / dx * (1 + 1e-9)));
                    m = std::max(m + 1, need);
                    if (m > cap) throw Exceeded{stats.max_speed};
                    J = saved;
                    ok = false;
                    break;
                }
                stats.max_courant = std::max(stats.max_courant, h * r.speed / dx);
                ++stats.total_steps;
                t -= h;
            }
            if (ok) break;
        }
        stats.max_substeps = std::max(stats.max_substeps, static_cast<int>(m));
        for (int i = 0; i < xa.n; ++i) {
            const double v = J[static_cast<std::size_t>(i)];
            if (!std::isfinite(v)) throw NonConvergence("value function became non-finite at t = " + std::to_string(ta.at(j)));
            Jf(i, j) = v;
        }
        // Let the step count relax when the speed drops.
        if (m > 1) {
            double speed = 0.0;
            for (int i = 0; i < xa.n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                const double pB = i > 0 ? (J[k] - J[k - 1]) / dx : (J[1] - J[0]) / dx;
                const double pF = i + 1 < xa.n ? (J[k + 1] - J[k]) / dx : pB;
                speed = std::max({speed, std::abs(ham(xa.at(i), pB, ta.at(j)).Hp), std::abs(ham(xa.at(i), pF, ta.at(j)).Hp)});
            }
            m = std::max(1L, static_cast<long>(std::ceil(dt_out * speed / dx * (1 + 1e-9))));
        }
    }
    return Jf;
}

void fill_derived(ValueGrid& g, const NodeHamiltonian& ham) {
    g.lambda = g.J.d_dx();
    g.u_star = Field2D(g.J.x_axis(), g.J.t_axis());
    for (int j = 0; j < g.J.nt(); ++j) {
        for (int i = 0; i < g.J.nx(); ++i) {
            g.u_star(i, j) = ham.maximizer(g.J.x_axis().at(i), g.lambda(i, j), g.J.t_axis().at(j));
        }
    }
}

}  // namespace

ValueGrid solve_hjb(const ControlProblem& p, const BellmanConfig& cfg) {
    p.validate();
    cfg.validate();
    const NodeHamiltonian ham(p, cfg.control_bounds);
    ValueGrid g;
    try {
        g.J = sweep(ham, p, cfg, cfg.max_substeps, g.cfl);
    } catch (const Exceeded&) {
        // Diagnostic pass without the cap to find the speed the horizon really needs.
        CflStats diag;
        double speed = 0.0;
        try {
            sweep(ham, p, cfg, 1'000'000, diag);
            speed = diag.max_speed;
        } catch (const Exceeded& e) {
            speed = e.speed;
        }
        const double dx = (cfg.xmax - cfg.xmin) / (cfg.nx - 1);
        const double intervals = std::ceil((p.t1 - p.t0) * speed / (dx * cfg.max_substeps) * (1 + 1e-9));
        const long required = static_cast<long>(std::max(1.0, intervals)) + 1;
        throw CFLViolation("Nt = " + std::to_string(cfg.nt) + " violates dt*max|f| <= dx even with " +
                               std::to_string(cfg.max_substeps) + " sub-step(s) per interval (max |f| = " + std::to_string(speed) +
                               ", dx = " + std::to_string(dx) + "); need Nt >= " + std::to_string(required),
                           required);
    }
    fill_derived(g, ham);
    return g;
}

std::vector<double> hjb_step(const ControlProblem& p, const Axis& x, const std::vector<double>& J, double t, double h,
                             const std::optional<std::pair<double, double>>& control_bounds) {
    check_axis(x, 3, "x");
    if (J.size() != static_cast<std::size_t>(x.n)) throw GridError("slice length does not match the x axis");
    const NodeHamiltonian ham(p, control_bounds);
    std::vector<double> out = J, scratch;
    const StepResult r = explicit_step(ham, x, out, t, h, scratch);
    if (!r.accepted) {
        throw CFLViolation("step violates dt*max|f| <= dx (max |f| = " + std::to_string(r.speed) + ")", -1);
    }
    return out;
}

ValueGrid solve_hjb(const ControlProblem& p, double xmin, double xmax, int nx, int nt) {
    BellmanConfig cfg;
    cfg.xmin = xmin;
    cfg.xmax = xmax;
    cfg.nx = nx;
    cfg.nt = nt;
    return solve_hjb(p, cfg);
}

Field2D lambda_field(const ValueGrid& grid) { return grid.J.d_dx(); }

HomogeneityReport homogeneity_check(const ValueGrid& grid, const ControlProblem& p, const Window& w) {
    check_axis(grid.x_axis(), 3, "x");
    check_axis(grid.t_axis(), 3, "t");
    const HamiltonianEval ev(p);
    const Field2D Jt = grid.J.d_dt();
    HomogeneityReport rep;
    rep.residual = Field2D(grid.x_axis(), grid.t_axis());
    for (int j = 0; j < grid.J.nt(); ++j) {
        const double t = grid.t_axis().at(j);
        for (int i = 0; i < grid.J.nx(); ++i) {
            const double x = grid.x_axis().at(i);
            const double u = grid.u_star(i, j);
            rep.residual(i, j) = ev.F(x, u, t) + grid.lambda(i, j) * ev.f(x, u, t) + Jt(i, j);
        }
    }
    rep.slice_max = slice_max_abs(rep.residual, w);
    Window xw = w;
    xw.skip_t_edges = false;
    rep.slice_mean.assign(static_cast<std::size_t>(grid.J.nt()), 0.0);
    for (int j = 0; j < grid.J.nt(); ++j) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < grid.J.nx(); ++i) {
            if (!xw.contains(rep.residual, i, j)) continue;
            sum += rep.residual(i, j);
            ++count;
        }
        rep.slice_mean[static_cast<std::size_t>(j)] = count ? sum / count : 0.0;
    }
    rep.max_abs = window_max_abs(rep.residual, w);
    return rep;
}

double verify_consistency(const ValueGrid& grid, const ControlProblem& p, const Window& w) {
    return window_max_abs(consistency_residual(p, grid.lambda), w);
}

std::vector<double> control_set(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
    return out;
}

ValueGrid brute_force_dp(const ControlProblem& p, const Axis& x, int nt, const std::vector<double>& controls) {
    p.validate();
    check_axis(x, 2, "x");
    if (x.n > 101) throw GridError("brute-force DP is limited to 101 x nodes");
    if (controls.empty() || controls.size() > 41) throw ConfigError("brute-force DP needs 1 to 41 controls");
    if (nt < 2) throw GridError("t axis needs at least 2 nodes");
    const HamiltonianEval ev(p);
    const Axis ta{p.t0, p.t1, nt};
    ValueGrid g;
    g.J = Field2D(x, ta);
    g.u_star = Field2D(x, ta);
    const double dt = ta.step();
    auto clamped = [&](int j, double s) {
        const double pos = std::clamp((s - x.lo) / x.step(), 0.0, static_cast<double>(x.n - 1));
        const int i = std::min(static_cast<int>(pos), x.n - 2);
        const double a = pos - i;
        return (1 - a) * g.J(i, j) + a * g.J(i + 1, j);
    };
    for (int j = nt - 2; j >= 0; --j) {
        const double t = ta.at(j);
        for (int i = 0; i < x.n; ++i) {
            const double xi = x.at(i);
            double best = -INFINITY, arg = controls.front();
            for (double u : controls) {
                const double v = ev.F(xi, u, t) * dt + clamped(j + 1, xi + ev.f(xi, u, t) * dt);
                if (v > best) {
                    best = v;
                    arg = u;
                }
            }
            g.J(i, j) = best;
            g.u_star(i, j) = arg;
        }
    }
    for (int i = 0; i < x.n; ++i) g.u_star(i, nt - 1) = g.u_star(i, std::max(0, nt - 2));
    g.lambda = g.J.d_dx();
    return g;
}

ValueGrid tabulate_value_function(const ControlProblem& p, const std::function<double(double, double)>& J,
                                  const std::function<double(double, double)>& J_x, const Axis& x, const Axis& t) {
    const ControlLaw law(p);
    ValueGrid g;
    g.J = Field2D(x, t);
    g.lambda = Field2D(x, t);
    g.u_star = Field2D(x, t);
    for (int j = 0; j < t.n; ++j) {
        for (int i = 0; i < x.n; ++i) {
            g.J(i, j) = J(x.at(i), t.at(j));
            g.lambda(i, j) = J_x(x.at(i), t.at(j));
            g.u_star(i, j) = law(x.at(i), g.lambda(i, j), t.at(j));
        }
    }
    return g;
}

ValueGrid tabulate_value_function(const ControlProblem& p, const Expr& J, const Axis& x, const Axis& t) {
    const NumericExpr v(J), vx(differentiate(J, Var::x));
    return tabulate_value_function(
        p, [&](double a, double b) { return v(a, 0.0, 0.0, 0.0, b); },
        [&](double a, double b) { return vx(a, 0.0, 0.0, 0.0, b); }, x, t);
}

int coarsen(int n) {
    if (n < 5 || (n - 1) % 2 != 0) {
        throw GridError("refinement study needs an odd node count >= 5, got " + std::to_string(n));
    }
    return (n - 1) / 2 + 1;
}

}  // namespace dynopt
