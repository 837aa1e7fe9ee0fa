#include "problem_file.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dynopt/errors.hpp"

namespace dynopt::cli {

namespace pt = boost::property_tree;

namespace {

double to_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": '" + text + "' is not a number");
    }
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size() || !std::isfinite(v)) throw ConfigError(key + ": '" + text + "' is not a finite number");
    return v;
}

int to_int(const std::string& key, const std::string& text) {
    const double v = to_number(key, text);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": '" + text + "' is not an integer");
    return static_cast<int>(v);
}

Expr to_expr(const std::string& key, const std::string& text) {
    try {
        return parse(text);
    } catch (const UnknownIdentifier& e) {
        throw UnknownIdentifier(key + ": " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" (at")),
                                e.position());
    } catch (const ParseError& e) {
        throw ParseError(key + ": " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" (at")),
                         e.position());
    }
}

void reject_unknown(const pt::ptree& section, const std::string& name, std::set<std::string> allowed) {
    for (const auto& [key, value] : section) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
    }
}

std::optional<std::string> get(const pt::ptree& s, const std::string& key) {
    auto v = s.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    // Trailing "; comment" on a value line.
    std::string text = v->substr(0, v->find(';'));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return text;
}

}  // namespace

ProblemFile parse_problem_text(const std::string& text, const std::string& default_name) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed problem file: ") + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        static const std::set<std::string> known{"problem", "shooting", "grid", "control", "quantum", "verify"};
        if (!known.count(section)) throw ConfigError("unknown section [" + section + "]");
        if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    }
    const auto problem = tree.get_child_optional("problem");
    if (!problem) throw ConfigError("missing [problem] section");
    reject_unknown(*problem, "problem", {"name", "F", "f", "t0", "t1", "x0", "sense"});

    ProblemFile pf;
    pf.name = get(*problem, "name").value_or(default_name);
    auto required = [&](const char* key) {
        auto v = get(*problem, key);
        if (!v) throw ConfigError(std::string("missing required key problem.") + key);
        return *v;
    };
    pf.problem.F = to_expr("problem.F", required("F"));
    pf.problem.f = to_expr("problem.f", required("f"));
    pf.problem.t0 = to_number("problem.t0", required("t0"));
    pf.problem.t1 = to_number("problem.t1", required("t1"));
    pf.problem.x0 = to_number("problem.x0", required("x0"));
    const std::string sense = get(*problem, "sense").value_or("maximize");
    if (sense == "maximize") {
        pf.problem.sense = Sense::maximize;
    } else if (sense == "minimize") {
        pf.problem.sense = Sense::minimize;
    } else {
        throw ConfigError("problem.sense must be maximize or minimize, got '" + sense + "'");
    }
    pf.problem.validate();

    if (const auto s = tree.get_child_optional("shooting")) {
        reject_unknown(*s, "shooting", {"dt", "tol", "max_iter", "lambda0_bracket"});
        if (auto v = get(*s, "dt")) pf.shooting.dt = to_number("shooting.dt", *v);
        if (auto v = get(*s, "tol")) pf.shooting.tol = to_number("shooting.tol", *v);
        if (auto v = get(*s, "max_iter")) pf.shooting.max_iter = to_int("shooting.max_iter", *v);
        if (auto v = get(*s, "lambda0_bracket")) {
            const auto comma = v->find(',');
            if (comma == std::string::npos) throw ConfigError("shooting.lambda0_bracket must be 'lo, hi'");
            pf.shooting.lambda0_bracket = {to_number("shooting.lambda0_bracket", v->substr(0, comma)),
                                           to_number("shooting.lambda0_bracket", v->substr(comma + 1))};
        }
        pf.shooting.validate();
    }

    if (const auto s = tree.get_child_optional("grid")) {
        reject_unknown(*s, "grid", {"xmin", "xmax", "nx", "nt", "max_substeps"});
        pf.has_grid = true;
        if (auto v = get(*s, "xmin")) pf.grid.xmin = to_number("grid.xmin", *v);
        if (auto v = get(*s, "xmax")) pf.grid.xmax = to_number("grid.xmax", *v);
        if (auto v = get(*s, "nx")) pf.grid.nx = to_int("grid.nx", *v);
        if (auto v = get(*s, "nt")) pf.grid.nt = to_int("grid.nt", *v);
        if (auto v = get(*s, "max_substeps")) pf.grid.max_substeps = to_int("grid.max_substeps", *v);
        if (pf.grid.nx && *pf.grid.nx < 3) throw ConfigError("grid.nx must be at least 3");
        if (pf.grid.nt && *pf.grid.nt < 2) throw ConfigError("grid.nt must be at least 2");
        if (pf.grid.xmin && pf.grid.xmax && !(*pf.grid.xmin < *pf.grid.xmax)) {
            throw ConfigError("grid.xmin must be below grid.xmax");
        }
    }

    if (const auto s = tree.get_child_optional("control")) {
        reject_unknown(*s, "control", {"umin", "umax"});
        const auto lo = get(*s, "umin"), hi = get(*s, "umax");
        if (!lo || !hi) throw ConfigError("[control] needs both umin and umax");
        pf.control_bounds = std::make_pair(to_number("control.umin", *lo), to_number("control.umax", *hi));
        if (!(pf.control_bounds->first < pf.control_bounds->second)) throw ConfigError("control.umin must be below control.umax");
    }

    if (const auto s = tree.get_child_optional("quantum")) {
        reject_unknown(*s, "quantum", {"reference"});
        if (auto v = get(*s, "reference")) {
            pf.quantum_reference = to_expr("quantum.reference", *v);
            if (pf.quantum_reference->mentions(Var::u)) throw ConfigError("quantum.reference may only use x and t");
        }
    }

    if (const auto s = tree.get_child_optional("verify")) {
        reject_unknown(*s, "verify", {"lambda_agreement", "consistency_ratio", "consistency_max", "homogeneity",
                                      "dp_agreement", "closed_loop", "lambda_field"});
        VerifySection& v = pf.verify;
        if (auto a = get(*s, "lambda_agreement")) v.lambda_agreement = to_number("verify.lambda_agreement", *a);
        if (auto a = get(*s, "consistency_ratio")) v.consistency_ratio = to_number("verify.consistency_ratio", *a);
        if (auto a = get(*s, "consistency_max")) v.consistency_max = to_number("verify.consistency_max", *a);
        if (auto a = get(*s, "homogeneity")) v.homogeneity = to_number("verify.homogeneity", *a);
        if (auto a = get(*s, "dp_agreement")) v.dp_agreement = to_number("verify.dp_agreement", *a);
        if (auto a = get(*s, "closed_loop")) v.closed_loop = to_number("verify.closed_loop", *a);
        if (auto a = get(*s, "lambda_field")) {
            v.lambda_field = to_expr("verify.lambda_field", *a);
            if (v.lambda_field->mentions(Var::u)) throw ConfigError("verify.lambda_field may only use x and t");
        }
    }
    return pf;
}

ProblemFile load_problem_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open problem file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem_text(buf.str(), path.stem().string());
}

BellmanConfig bellman_config(const ProblemFile& pf, const GridSection& overrides) {
    BellmanConfig cfg;
    auto pick = [](const auto& over, const auto& file, const char* key) {
        if (over) return *over;
        if (file) return *file;
        throw ConfigError(std::string("grid.") + key + " is required (set it in [grid] or on the command line)");
    };
    cfg.xmin = pick(overrides.xmin, pf.grid.xmin, "xmin");
    cfg.xmax = pick(overrides.xmax, pf.grid.xmax, "xmax");
    cfg.nx = pick(overrides.nx, pf.grid.nx, "nx");
    cfg.nt = pick(overrides.nt, pf.grid.nt, "nt");
    if (pf.grid.max_substeps) cfg.max_substeps = *pf.grid.max_substeps;
    cfg.control_bounds = pf.control_bounds;
    if (cfg.nx < 3) throw ConfigError("grid.nx must be at least 3");
    if (cfg.nt < 2) throw ConfigError("grid.nt must be at least 2");
    if (!(cfg.xmin < cfg.xmax)) throw ConfigError("grid.xmin must be below grid.xmax");
    if (cfg.max_substeps < 1) throw ConfigError("grid.max_substeps must be at least 1");
    return cfg;
}

}  // namespace dynopt::cli
