#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "dynopt/bellman.hpp"
#include "dynopt/constraints.hpp"
#include "dynopt/errors.hpp"
#include "dynopt/pontryagin.hpp"
#include "dynopt/quantize.hpp"
#include "problem_file.hpp"

namespace dynopt::cli {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

/// Ordered `key = value` document.
class KeyValue {
public:
    void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, num(value)); }
    void add(const std::string& key, long value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    void add(const std::string& key, const char* value) { add(key, std::string(value)); }

    void write(const std::string& path) const {
        if (path.empty()) return;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write report '" + path + "'");
        for (const auto& [k, v] : rows_) f << k << " = " << v << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

std::string line(const std::string& key, const std::string& value) {
    std::string k = key;
    if (k.size() < 14) k.resize(14, ' ');
    return k + ' ' + value + '\n';
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    return f;
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
    auto f = open_csv(path);
    f << "t,x,lambda,u\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        f << num(tr.t[k]) << ',' << num(tr.x[k]) << ',' << num(tr.lambda[k]) << ',' << num(tr.u[k]) << '\n';
    }
}

void write_grid_csv(const std::string& path, const ValueGrid& g) {
    auto f = open_csv(path);
    f << "t,x,J,lambda,u_star\n";
    for (int j = 0; j < g.J.nt(); ++j) {
        const std::string t = num(g.t_axis().at(j));
        for (int i = 0; i < g.J.nx(); ++i) {
            f << t << ',' << num(g.x_axis().at(i)) << ',' << num(g.J(i, j)) << ',' << num(g.lambda(i, j)) << ','
              << num(g.u_star(i, j)) << '\n';
        }
    }
}

const char* kObstructionNote =
    "d2H0/du2; when nonzero the operator constraints cannot both annihilate Psi (reported only)";

// ---------------------------------------------------------------- analyze

int cmd_analyze(const ProblemFile& pf, std::ostream& out, std::ostream& err, KeyValue& kv) {
    const DiracReport r = analyze(pf.problem);
    kv.add("problem", pf.name);
    kv.add("sense", std::string(to_string(pf.problem.sense)));
    kv.add("H0", r.H0.str());
    kv.add("Phi1", r.Phi1.str());
    kv.add("Phi2", r.Phi2.str());
    kv.add("constraints", static_cast<int>(r.chain.size()));
    kv.add("bracket_Phi1_Phi2", r.dirac_matrix[0][1].str());
    kv.add("det", r.det.str());
    kv.add("classification", std::string(to_string(r.classification)));
    kv.add("alpha", r.obstruction_alpha.str());

    out << line("problem", pf.name + " (" + std::string(to_string(pf.problem.sense)) + ")");
    out << line("H0", r.H0.str());
    out << line("Phi1", r.Phi1.str());
    out << line("Phi2", r.Phi2.str());
    for (std::size_t k = 2; k < r.chain.size(); ++k) out << line("Phi" + std::to_string(k + 1), r.chain[k].str());
    out << line("{Phi1,Phi2}", r.dirac_matrix[0][1].str());
    out << line("dirac matrix", "[[0, " + r.dirac_matrix[0][1].str() + "], [" + r.dirac_matrix[1][0].str() + ", 0]]");
    out << line("det", r.det.str());
    out << line("class", std::string(to_string(r.classification)));

    if (r.classification == Classification::Degenerate) {
        out << line("alpha", r.obstruction_alpha.str());
        err << "degenerate problem: {Phi1,Phi2} = -d2H0/du2 vanishes on the constraint surface, so the "
               "second-class condition fails (H0 is linear in u)\n";
        return kDegenerate;
    }
    out << line("mu1", r.mu1.str());
    out << line("mu2", r.mu2.str());
    out << line("dx/dt", r.eom.at(Var::x).str());
    out << line("dp_x/dt", r.eom.at(Var::p_x).str());
    out << line("du/dt", r.eom.at(Var::u).str());
    out << line("dp_u/dt", r.eom.at(Var::p_u).str());
    kv.add("mu1", r.mu1.str());
    kv.add("mu2", r.mu2.str());
    kv.add("eom.x", r.eom.at(Var::x).str());
    kv.add("eom.p_x", r.eom.at(Var::p_x).str());
    kv.add("eom.u", r.eom.at(Var::u).str());
    kv.add("eom.p_u", r.eom.at(Var::p_u).str());
    if (r.u_on_surface) {
        out << line("surface", "u = " + r.u_on_surface->str());
        out << line("  dx/dt", reduce_on_surface(r.eom.at(Var::x), r)->str());
        out << line("  dp_x/dt", reduce_on_surface(r.eom.at(Var::p_x), r)->str());
        out << line("  dp_u/dt", reduce_on_surface(r.eom.at(Var::p_u), r)->str());
        kv.add("surface.u", r.u_on_surface->str());
        kv.add("equivalence_method", "exact substitution");
    } else {
        out << line("surface", "Phi2 not affine in u; equivalence checked on 50 sampled surface points");
        kv.add("equivalence_method", "sampled surface, tolerance 1e-10");
    }
    out << line("equivalence", r.pontryagin_equivalent ? "true" : "false");
    out << line("alpha", r.obstruction_alpha.str() + "  (" + kObstructionNote + ")");
    kv.add("equivalence", r.pontryagin_equivalent);
    return kSuccess;
}

// ---------------------------------------------------------------- pontryagin

struct PontryaginFlags {
    std::optional<double> dt, tol;
    std::string out;
};

int cmd_pontryagin(const ProblemFile& pf, const PontryaginFlags& flags, std::ostream& out, KeyValue& kv) {
    ShootingConfig cfg = pf.shooting;
    if (flags.dt) cfg.dt = *flags.dt;
    if (flags.tol) cfg.tol = *flags.tol;
    cfg.validate();
    const Trajectory tr = shoot(pf.problem, cfg);
    const std::string csv = flags.out.empty() ? pf.name + "_trajectory.csv" : flags.out;
    write_trajectory_csv(csv, tr);

    out << line("problem", pf.name);
    out << line("steps", std::to_string(tr.size() - 1) + " (dt = " + num((pf.problem.t1 - pf.problem.t0) / static_cast<double>(tr.size() - 1)) + ")");
    out << line("lambda(t0)", num(tr.lambda.front()));
    out << line("x(t1)", num(tr.x.back()));
    out << line("lambda(t1)", num(tr.lambda.back()));
    out << line("action", num(tr.action));
    out << line("csv", csv);
    kv.add("problem", pf.name);
    kv.add("steps", static_cast<long>(tr.size() - 1));
    kv.add("lambda_t0", tr.lambda.front());
    kv.add("x_t1", tr.x.back());
    kv.add("lambda_t1", tr.lambda.back());
    kv.add("action", tr.action);
    kv.add("csv", csv);
    return kSuccess;
}

// ---------------------------------------------------------------- bellman

struct BellmanFlags {
    GridSection grid;
    std::string out;
};

int cmd_bellman(const ProblemFile& pf, const BellmanFlags& flags, std::ostream& out, KeyValue& kv) {
    const BellmanConfig cfg = bellman_config(pf, flags.grid);
    if (pf.problem.x0 < cfg.xmin || pf.problem.x0 > cfg.xmax) throw ConfigError("x0 lies outside [xmin, xmax]");
    const ValueGrid g = solve_hjb(pf.problem, cfg);
    const std::string csv = flags.out.empty() ? pf.name + "_grid.csv" : flags.out;
    write_grid_csv(csv, g);
    const double J0 = g.J.interpolate(pf.problem.x0, pf.problem.t0);
    const double l0 = g.lambda.interpolate(pf.problem.x0, pf.problem.t0);

    out << line("problem", pf.name);
    out << line("grid", "x in [" + num(cfg.xmin) + ", " + num(cfg.xmax) + "], nx = " + std::to_string(cfg.nx) +
                            ", nt = " + std::to_string(cfg.nt));
    out << line("J(x0,t0)", num(J0));
    out << line("lambda(x0,t0)", num(l0));
    out << line("cfl", "max|f| = " + num(g.cfl.max_speed) + ", max dt*|f|/dx = " + num(g.cfl.max_courant) +
                           ", sub-steps <= " + std::to_string(g.cfl.max_substeps) + ", steps = " +
                           std::to_string(g.cfl.total_steps));
    out << line("csv", csv);
    kv.add("problem", pf.name);
    kv.add("nx", cfg.nx);
    kv.add("nt", cfg.nt);
    kv.add("xmin", cfg.xmin);
    kv.add("xmax", cfg.xmax);
    kv.add("J_x0_t0", J0);
    kv.add("lambda_x0_t0", l0);
    kv.add("cfl.max_speed", g.cfl.max_speed);
    kv.add("cfl.max_courant", g.cfl.max_courant);
    kv.add("cfl.max_substeps", g.cfl.max_substeps);
    kv.add("cfl.total_steps", g.cfl.total_steps);
    kv.add("csv", csv);
    return kSuccess;
}

// ---------------------------------------------------------------- verify

struct Check {
    std::string name;
    bool pass;
    double measured;
    double tolerance;
    std::string note;
};

Field2D tabulate_field(const Expr& e, const Axis& x, const Axis& t) {
    const NumericExpr f(e);
    Field2D out(x, t);
    for (int j = 0; j < t.n; ++j) {
        for (int i = 0; i < x.n; ++i) out(i, j) = f(x.at(i), 0.0, 0.0, 0.0, t.at(j));
    }
    return out;
}

double max_abs_or_inf(const std::function<double()>& f) {
    try {
        return f();
    } catch (const GridError&) {
        return std::numeric_limits<double>::infinity();
    }
}

int cmd_verify(const ProblemFile& pf, std::ostream& out, std::ostream& err, KeyValue& kv) {
    const ControlProblem& p = pf.problem;
    const DiracReport r = analyze(p);
    if (r.classification == Classification::Degenerate) {
        err << "degenerate problem: the second-class condition fails (d2H0/du2 vanishes on the surface); "
               "no numerical checks were run\n";
        return kDegenerate;
    }
    const VerifySection& v = pf.verify;
    const BellmanConfig fine_cfg = bellman_config(pf);
    BellmanConfig coarse_cfg = fine_cfg;
    try {
        coarse_cfg.nx = coarsen(fine_cfg.nx);
        coarse_cfg.nt = coarsen(fine_cfg.nt);
    } catch (const GridError& e) {
        throw ConfigError(std::string("verify needs odd nx and nt for the refinement study: ") + e.what());
    }

    const Trajectory shot = shoot(p, pf.shooting);
    const ValueGrid fine = solve_hjb(p, fine_cfg);
    const ValueGrid coarse = solve_hjb(p, coarse_cfg);
    Field2D lf = fine.lambda, lc = coarse.lambda;
    std::string field_note = "lambda = dJ/dx of the HJB grid";
    if (v.lambda_field) {
        lf = tabulate_field(*v.lambda_field, fine.x_axis(), fine.t_axis());
        lc = tabulate_field(*v.lambda_field, coarse.x_axis(), coarse.t_axis());
        field_note = "lambda field from [verify] lambda_field = " + v.lambda_field->str();
    }

    std::vector<Check> checks;
    checks.push_back({"symbolic_equivalence", r.pontryagin_equivalent, r.pontryagin_equivalent ? 0.0 : 1.0, 0.0,
                      r.u_on_surface ? "Dirac vs Pontryagin dynamics, exact substitution on the surface"
                                     : "Dirac vs Pontryagin dynamics, 50 sampled surface points"});

    const double lam = max_abs_or_inf([&] {
        double m = 0.0;
        for (std::size_t k = 0; k < shot.size(); ++k) m = std::max(m, std::abs(lf.interpolate(shot.x[k], shot.t[k]) - shot.lambda[k]));
        return m;
    });
    checks.push_back({"shoot_vs_hjb_lambda", lam <= v.lambda_agreement, lam, v.lambda_agreement,
                      "max |lambda_field(x(t),t) - lambda_shot(t)| along the shot trajectory"});

    const double rc = window_max_abs(consistency_residual(p, lc));
    const double rf = window_max_abs(consistency_residual(p, lf));
    const double ratio = rf > 0.0 ? rc / rf : (rc > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    const bool ratio_ok = ratio >= v.consistency_ratio || (rc == 0.0 && rf == 0.0);
    checks.push_back({"consistency_refinement", ratio_ok, ratio, v.consistency_ratio,
                      "interior max of dH*/dx + dlambda/dt, nx " + std::to_string(coarse_cfg.nx) + " -> " +
                          std::to_string(fine_cfg.nx) + " (" + num(rc) + " -> " + num(rf) + "); " + field_note});
    checks.push_back({"consistency_residual", rf <= v.consistency_max, rf, v.consistency_max,
                      "interior max of dH*/dx + dlambda/dt on the fine grid"});

    const double hom = homogeneity_check(fine, p).max_abs;
    checks.push_back({"homogeneity", hom <= v.homogeneity, hom, v.homogeneity,
                      "interior max |F + J_x f + J_t| (g(t) = 0)"});

    const Axis dp_x{fine_cfg.xmin, fine_cfg.xmax, std::min(fine_cfg.nx, 101)};
    double umin = 0.0, umax = 0.0;
    if (pf.control_bounds) {
        std::tie(umin, umax) = *pf.control_bounds;
    } else {
        umin = *std::min_element(fine.u_star.values().begin(), fine.u_star.values().end());
        umax = *std::max_element(fine.u_star.values().begin(), fine.u_star.values().end());
        const double pad = 0.1 * (umax - umin) + 1e-3;
        umin -= pad;
        umax += pad;
    }
    const ValueGrid dp = brute_force_dp(p, dp_x, 41, control_set(umin, umax, 41));
    double dpe = 0.0;
    Window dw;
    dw.skip_t_edges = false;
    for (int j = 0; j < dp.J.nt(); ++j) {
        for (int i = 0; i < dp.J.nx(); ++i) {
            if (dw.contains(dp.J, i, j)) {
                dpe = std::max(dpe, std::abs(dp.J(i, j) - fine.J.interpolate(dp.x_axis().at(i), dp.t_axis().at(j))));
            }
        }
    }
    checks.push_back({"dp_agreement", dpe <= v.dp_agreement, dpe, v.dp_agreement,
                      "brute-force DP (nx " + std::to_string(dp_x.n) + ", nt 41, 41 controls in [" + num(umin) + ", " +
                          num(umax) + "]) vs HJB, interior max |dJ|"});

    const double cl = max_abs_or_inf([&] {
        const Trajectory loop = closed_loop_integrate(p, lf, static_cast<int>(shot.size() - 1));
        double m = 0.0;
        for (std::size_t k = 0; k < shot.size(); ++k) m = std::max(m, std::abs(loop.x[k] - shot.x[k]));
        return m;
    });
    checks.push_back({"closed_loop_vs_shot", cl <= v.closed_loop, cl, v.closed_loop,
                      "max |x_closed_loop(t) - x_shot(t)|"});

    bool all = true;
    out << "verification of " << pf.name << '\n';
    char buf[160];
    for (const Check& c : checks) {
        all = all && c.pass;
        const bool lower = c.name == "consistency_refinement";
        std::snprintf(buf, sizeof buf, "%-4s %-24s %-24s %s %-24s ", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                      num(c.measured).c_str(), lower ? ">=" : "<=", num(c.tolerance).c_str());
        out << buf << c.note << '\n';
        kv.add("check." + c.name + ".status", c.pass ? "pass" : "fail");
        kv.add("check." + c.name + ".measured", c.measured);
        kv.add("check." + c.name + ".tolerance", c.tolerance);
        kv.add("check." + c.name + ".note", c.note);
    }
    out << "overall: " << (all ? "PASS" : "FAIL") << '\n';
    kv.add("overall", all ? "pass" : "fail");
    return all ? kSuccess : kVerificationFailed;
}

// ---------------------------------------------------------------- quantum

struct QuantumRow {
    int nx, nt;
    double r1, r2, schrodinger;
};

QuantumRow quantum_row(const ValueGrid& g, const ControlProblem& p) {
    const WaveGrid w = wave_function(g);
    const ConstraintResidual c = constraint_residual(w, g, p);
    return {g.J.nx(), g.J.nt(), c.r1, c.r2, schrodinger_residual(w, g, p)};
}

double factor(double coarse, double fine) {
    if (fine == 0.0) return coarse == 0.0 ? std::nan("") : std::numeric_limits<double>::infinity();
    return coarse / fine;
}

int cmd_quantum(const ProblemFile& pf, std::ostream& out, KeyValue& kv) {
    if (!pf.has_grid) throw ConfigError("quantum needs a [grid] section");
    const ControlProblem& p = pf.problem;
    const BellmanConfig fine_cfg = bellman_config(pf);
    BellmanConfig coarse_cfg = fine_cfg;
    try {
        coarse_cfg.nx = coarsen(fine_cfg.nx);
        coarse_cfg.nt = coarsen(fine_cfg.nt);
    } catch (const GridError& e) {
        throw ConfigError(std::string("quantum needs odd nx and nt for the refinement study: ") + e.what());
    }
    if (coarse_cfg.nt < 3) throw ConfigError("quantum needs nt >= 5");
    const ValueGrid fine = solve_hjb(p, fine_cfg);
    const ValueGrid coarse = solve_hjb(p, coarse_cfg);
    const QuantumRow a = quantum_row(coarse, p), b = quantum_row(fine, p);
    const Expr alpha = differentiate(differentiate(hamiltonian_h0(p), Var::u), Var::u);

    char buf[200];
    out << "quantum check for " << pf.name << " (Psi = exp(iJ), hbar = 1, interior nodes)\n";
    std::snprintf(buf, sizeof buf, "%-12s %6s %6s %-24s %-24s %-24s\n", "grid", "nx", "nt", "r1", "r2", "schrodinger");
    out << buf;
    auto row = [&](const char* label, const QuantumRow& q) {
        std::snprintf(buf, sizeof buf, "%-12s %6d %6d %-24s %-24s %-24s\n", label, q.nx, q.nt, num(q.r1).c_str(),
                      num(q.r2).c_str(), num(q.schrodinger).c_str());
        out << buf;
    };
    row("hjb coarse", a);
    row("hjb fine", b);
    const double f_sch = factor(a.schrodinger, b.schrodinger);
    const double f_r2 = factor(a.r2, b.r2);
    out << line("factor", "schrodinger " + num(f_sch) + ", r2 " + num(f_r2) + " (coarse/fine, upwind HJB grid)");
    for (const auto& [label, q] : {std::pair<std::string, const QuantumRow&>{"coarse", a}, {"fine", b}}) {
        kv.add("hjb." + label + ".nx", q.nx);
        kv.add("hjb." + label + ".nt", q.nt);
        kv.add("hjb." + label + ".r1", q.r1);
        kv.add("hjb." + label + ".r2", q.r2);
        kv.add("hjb." + label + ".schrodinger", q.schrodinger);
    }
    kv.add("hjb.factor.schrodinger", f_sch);
    kv.add("hjb.factor.r2", f_r2);

    if (pf.quantum_reference) {
        const ValueGrid rc = tabulate_value_function(p, *pf.quantum_reference, coarse.x_axis(), coarse.t_axis());
        const ValueGrid rf = tabulate_value_function(p, *pf.quantum_reference, fine.x_axis(), fine.t_axis());
        const QuantumRow c = quantum_row(rc, p), d = quantum_row(rf, p);
        row("ref coarse", c);
        row("ref fine", d);
        const double g_sch = factor(c.schrodinger, d.schrodinger);
        const double g_r2 = factor(c.r2, d.r2);
        out << line("factor", "schrodinger " + num(g_sch) + ", r2 " + num(g_r2) + " (coarse/fine, reference J = " +
                                  pf.quantum_reference->str() + ")");
        for (const auto& [label, q] : {std::pair<std::string, const QuantumRow&>{"coarse", c}, {"fine", d}}) {
            kv.add("reference." + label + ".r1", q.r1);
            kv.add("reference." + label + ".r2", q.r2);
            kv.add("reference." + label + ".schrodinger", q.schrodinger);
        }
        kv.add("reference.J", pf.quantum_reference->str());
        kv.add("reference.factor.schrodinger", g_sch);
        kv.add("reference.factor.r2", g_r2);
    }
    out << line("alpha", alpha.str() + "  (" + kObstructionNote + ")");
    kv.add("alpha", alpha.str());
    return kSuccess;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
        dynamic_cast<const MissingBinding*>(&e)) {
        return kInputError;
    }
    if (dynamic_cast<const DegenerateError*>(&e) || dynamic_cast<const WrongCurvature*>(&e) ||
        dynamic_cast<const ConstraintLoopError*>(&e) || dynamic_cast<const NotAffine*>(&e)) {
        return kDegenerate;
    }
    return kSolverFailure;
}

const char* label_for(int code) {
    switch (code) {
        case kInputError: return "input error";
        case kDegenerate: return "degenerate problem";
        default: return "solver failure";
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pontryagin, Dirac and Hamilton-Jacobi-Bellman views of one-state optimal control problems",
                 "dynopt"};
    app.require_subcommand(1);
    std::string file, report;
    PontryaginFlags pflags;
    BellmanFlags bflags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("file", file, "problem file (INI)")->required();
        sub->add_option("--report", report, "also write a key = value report to this path");
    };
    CLI::App* analyze_cmd = app.add_subcommand("analyze", "Dirac constraint analysis of H0 = F + p_x f");
    add_common(analyze_cmd);
    CLI::App* pont_cmd = app.add_subcommand("pontryagin", "solve the Pontryagin boundary value problem by shooting");
    add_common(pont_cmd);
    pont_cmd->add_option("--dt", pflags.dt, "RK4 step (default from [shooting] or 1e-3)");
    pont_cmd->add_option("--tol", pflags.tol, "tolerance on |lambda(t1)| (default 1e-9)");
    pont_cmd->add_option("--out", pflags.out, "trajectory CSV path (default <name>_trajectory.csv)");
    CLI::App* bell_cmd = app.add_subcommand("bellman", "solve the HJB equation on an (x,t) grid");
    add_common(bell_cmd);
    bell_cmd->add_option("--nx", bflags.grid.nx, "x nodes");
    bell_cmd->add_option("--nt", bflags.grid.nt, "t nodes");
    bell_cmd->add_option("--xmin", bflags.grid.xmin, "left end of the x range");
    bell_cmd->add_option("--xmax", bflags.grid.xmax, "right end of the x range");
    bell_cmd->add_option("--out", bflags.out, "grid CSV path (default <name>_grid.csv)");
    CLI::App* verify_cmd = app.add_subcommand("verify", "cross-check the symbolic, open-loop and HJB solutions");
    add_common(verify_cmd);
    CLI::App* quantum_cmd = app.add_subcommand("quantum", "Schrodinger and operator-constraint residuals of exp(iJ)");
    add_common(quantum_cmd);

    std::vector<std::string> argv_store{"dynopt"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }

    try {
        const ProblemFile pf = load_problem_file(file);
        KeyValue kv;
        kv.add("command", app.get_subcommands().front()->get_name());
        int code = kSuccess;
        if (*analyze_cmd) code = cmd_analyze(pf, out, err, kv);
        if (*pont_cmd) code = cmd_pontryagin(pf, pflags, out, kv);
        if (*bell_cmd) code = cmd_bellman(pf, bflags, out, kv);
        if (*verify_cmd) code = cmd_verify(pf, out, err, kv);
        if (*quantum_cmd) code = cmd_quantum(pf, out, kv);
        kv.add("exit_code", code);
        kv.write(report);
        return code;
    } catch (const CFLViolation& e) {
        err << "solver failure: " << e.what() << '\n';
        err << "required nt: " << e.required_nt() << '\n';
        return kSolverFailure;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        err << label_for(code) << ": " << e.what() << '\n';
        return code;
    }
}

}  // namespace dynopt::cli
