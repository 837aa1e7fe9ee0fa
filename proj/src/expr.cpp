#include "dynopt/expr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "dynopt/errors.hpp"
#include "expr_node.hpp"

namespace dynopt {

std::string_view to_string(Var v) {
    switch (v) {
        case Var::x: return "x";
        case Var::u: return "u";
        case Var::p_x: return "p_x";
        case Var::p_u: return "p_u";
        case Var::t: return "t";
    }
    return "?";
}

std::string_view to_string(Func f) {
    switch (f) {
        case Func::exp: return "exp";
        case Func::log: return "log";
        case Func::sin: return "sin";
        case Func::cos: return "cos";
    }
    return "?";
}

namespace detail {

namespace {

int sign_of(int v) { return (v > 0) - (v < 0); }

int compare_rational(const Rational& a, const Rational& b) {
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

struct MonomialDescending {
    bool operator()(const Monomial& a, const Monomial& b) const { return compare_lex(a, b) > 0; }
};

Monomial mono_mul(const Monomial& a, const Monomial& b) {
    Monomial out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const int c = compare(a[i].atom, b[j].atom);
        if (c < 0) {
            out.push_back(a[i++]);
        } else if (c > 0) {
            out.push_back(b[j++]);
        } else {
            out.push_back(Factor{a[i].atom, a[i].exp + b[j].exp});
            ++i;
            ++j;
        }
    }
    for (; i < a.size(); ++i) out.push_back(a[i]);
    for (; j < b.size(); ++j) out.push_back(b[j]);
    return out;
}

// a / b when every exponent of b is covered by a.
std::optional<Monomial> mono_div(const Monomial& a, const Monomial& b) {
    Monomial out;
    std::size_t i = 0;
    for (const Factor& fb : b) {
        while (i < a.size() && compare(a[i].atom, fb.atom) < 0) out.push_back(a[i++]);
        if (i == a.size() || compare(a[i].atom, fb.atom) != 0 || a[i].exp < fb.exp) return std::nullopt;
        if (a[i].exp > fb.exp) out.push_back(Factor{a[i].atom, a[i].exp - fb.exp});
        ++i;
    }
    for (; i < a.size(); ++i) out.push_back(a[i]);
    return out;
}

Poly from_map(const std::map<Monomial, Rational, MonomialDescending>& acc) {
    Poly p;
    p.terms.reserve(acc.size());
    for (const auto& [m, c] : acc) {
        if (c != 0) p.terms.push_back(Term{m, c});
    }
    return p;
}

Poly mul_term(const Poly& p, const Term& t) {
    Poly out;
    out.terms.reserve(p.terms.size());
    for (const Term& s : p.terms) out.terms.push_back(Term{mono_mul(s.mono, t.mono), s.coef * t.coef});
    // Multiplying by a monomial preserves the (lex) order.
    return out;
}

// p = coef · mono · rest, rest monic with no monomial content (absent when p is a monomial).
struct Decomposition {
    Rational coef;
    Monomial mono;
    std::optional<Poly> rest;
};

Decomposition decompose(const Poly& p) {
    Decomposition d;
    if (p.terms.size() == 1) {
        d.coef = p.terms[0].coef;
        d.mono = p.terms[0].mono;
        return d;
    }
    // Common monomial factor: atoms present in every term, with minimal exponent.
    Monomial g = p.terms[0].mono;
    for (std::size_t k = 1; k < p.terms.size() && !g.empty(); ++k) {
        Monomial next;
        const Monomial& m = p.terms[k].mono;
        std::size_t i = 0;
        for (const Factor& f : g) {
            while (i < m.size() && compare(m[i].atom, f.atom) < 0) ++i;
            if (i < m.size() && compare(m[i].atom, f.atom) == 0) {
                next.push_back(Factor{f.atom, std::min(f.exp, m[i].exp)});
            }
        }
        g = std::move(next);
    }
    Poly rest;
    rest.terms.reserve(p.terms.size());
    const Rational lead = p.terms[0].coef;
    for (const Term& t : p.terms) rest.terms.push_back(Term{*mono_div(t.mono, g), t.coef / lead});
    d.coef = lead;
    d.mono = std::move(g);
    d.rest = std::move(rest);
    return d;
}

void insert_den(std::vector<DenFactor>& den, const Poly& base, int exp) {
    auto it = std::lower_bound(den.begin(), den.end(), base,
                               [](const DenFactor& f, const Poly& b) { return compare(f.base, b) < 0; });
    if (it != den.end() && compare(it->base, base) == 0) {
        it->exp += exp;
    } else {
        den.insert(it, DenFactor{base, exp});
    }
}

}  // namespace

void normalize(ExprNode& n) {
    if (n.num.is_zero()) {
        n.den.clear();
        return;
    }
    for (DenFactor& f : n.den) {
        while (f.exp > 0) {
            auto q = divide_exact(n.num, f.base);
            if (!q) break;
            n.num = std::move(*q);
            --f.exp;
        }
    }
    std::erase_if(n.den, [](const DenFactor& f) { return f.exp == 0; });
}

namespace {

Poly den_product(const std::vector<DenFactor>& den) {
    Poly out = Poly::constant(1);
    for (const DenFactor& f : den) out = mul(out, power(f.base, f.exp));
    return out;
}

}  // namespace

int compare(const Atom& a, const Atom& b) {
    if (a.is_var != b.is_var) return a.is_var ? -1 : 1;
    if (a.is_var) return sign_of(static_cast<int>(a.var) - static_cast<int>(b.var));
    if (a.fn != b.fn) return sign_of(static_cast<int>(a.fn) - static_cast<int>(b.fn));
    if (a.arg == b.arg) return 0;
    return compare(*a.arg, *b.arg);
}

int compare_lex(const Monomial& a, const Monomial& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const int c = compare(a[i].atom, b[j].atom);
        if (c < 0) return 1;
        if (c > 0) return -1;
        if (a[i].exp != b[j].exp) return a[i].exp > b[j].exp ? 1 : -1;
        ++i;
        ++j;
    }
    if (i < a.size()) return 1;
    if (j < b.size()) return -1;
    return 0;
}

Poly Poly::constant(const Rational& c) {
    Poly p;
    if (c != 0) p.terms.push_back(Term{{}, c});
    return p;
}

Poly Poly::of_atom(const Atom& a) {
    Poly p;
    p.terms.push_back(Term{Monomial{Factor{a, 1}}, Rational(1)});
    return p;
}

int compare(const Poly& a, const Poly& b) {
    const std::size_t n = std::min(a.terms.size(), b.terms.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (int c = compare_lex(a.terms[k].mono, b.terms[k].mono)) return c;
        if (int c = compare_rational(a.terms[k].coef, b.terms[k].coef)) return c;
    }
    return sign_of(static_cast<int>(a.terms.size()) - static_cast<int>(b.terms.size()));
}

Poly add(const Poly& a, const Poly& b) {
    Poly out;
    out.terms.reserve(a.terms.size() + b.terms.size());
    std::size_t i = 0, j = 0;
    while (i < a.terms.size() && j < b.terms.size()) {
        const int c = compare_lex(a.terms[i].mono, b.terms[j].mono);
        if (c > 0) {
            out.terms.push_back(a.terms[i++]);
        } else if (c < 0) {
            out.terms.push_back(b.terms[j++]);
        } else {
            Rational s = a.terms[i].coef + b.terms[j].coef;
            if (s != 0) out.terms.push_back(Term{a.terms[i].mono, std::move(s)});
            ++i;
            ++j;
        }
    }
    for (; i < a.terms.size(); ++i) out.terms.push_back(a.terms[i]);
    for (; j < b.terms.size(); ++j) out.terms.push_back(b.terms[j]);
    return out;
}

Poly scale(const Poly& a, const Rational& c) {
    if (c == 0) return {};
    Poly out = a;
    for (Term& t : out.terms) t.coef *= c;
    return out;
}

Poly mul(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    if (b.terms.size() == 1) return mul_term(a, b.terms[0]);
    if (a.terms.size() == 1) return mul_term(b, a.terms[0]);
    std::map<Monomial, Rational, MonomialDescending> acc;
    for (const Term& s : a.terms) {
        for (const Term& t : b.terms) acc[mono_mul(s.mono, t.mono)] += s.coef * t.coef;
    }
    return from_map(acc);
}

Poly power(const Poly& a, int n) {
    Poly out = Poly::constant(1);
    for (int k = 0; k < n; ++k) out = mul(out, a);
    return out;
}

std::optional<Poly> divide_exact(const Poly& p, const Poly& d) {
    if (d.is_zero()) return std::nullopt;
    const Term& lead = d.terms[0];
    Poly q;
    Poly r = p;
    while (!r.is_zero()) {
        auto m = mono_div(r.terms[0].mono, lead.mono);
        // With a single divisor the remainder is unique, so a leading term that
        // cannot be reduced proves non-divisibility.
        if (!m) return std::nullopt;
        Term t{std::move(*m), r.terms[0].coef / lead.coef};
        r = add(r, mul_term(d, Term{t.mono, -t.coef}));
        q.terms.push_back(std::move(t));
    }
    return q;
}

int compare(const ExprNode& a, const ExprNode& b) {
    if (int c = compare(a.num, b.num)) return c;
    const std::size_t n = std::min(a.den.size(), b.den.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (int c = compare(a.den[k].base, b.den[k].base)) return c;
        if (a.den[k].exp != b.den[k].exp) return a.den[k].exp < b.den[k].exp ? -1 : 1;
    }
    return sign_of(static_cast<int>(a.den.size()) - static_cast<int>(b.den.size()));
}

ExprNode node_of(const Poly& p) { return ExprNode{p, {}}; }

ExprNode add(const ExprNode& a, const ExprNode& b) {
    if (a.num.is_zero()) return b;
    if (b.num.is_zero()) return a;
    if (a.den.empty() && b.den.empty()) return ExprNode{add(a.num, b.num), {}};
    // Least common denominator over the atom multisets.
    std::vector<DenFactor> lcd = a.den;
    for (const DenFactor& f : b.den) {
        auto it = std::find_if(lcd.begin(), lcd.end(), [&](const DenFactor& g) { return compare(g.base, f.base) == 0; });
        if (it == lcd.end()) {
            insert_den(lcd, f.base, f.exp);
        } else {
            it->exp = std::max(it->exp, f.exp);
        }
    }
    auto lift = [&](const ExprNode& n) {
        Poly out = n.num;
        for (const DenFactor& f : lcd) {
            int have = 0;
            for (const DenFactor& g : n.den) {
                if (compare(g.base, f.base) == 0) have = g.exp;
            }
            if (f.exp > have) out = mul(out, power(f.base, f.exp - have));
        }
        return out;
    };
    ExprNode out{add(lift(a), lift(b)), std::move(lcd)};
    normalize(out);
    return out;
}

ExprNode mul(const ExprNode& a, const ExprNode& b) {
    if (a.num.is_zero() || b.num.is_zero()) return ExprNode{};
    ExprNode out{mul(a.num, b.num), a.den};
    for (const DenFactor& f : b.den) insert_den(out.den, f.base, f.exp);
    if (!out.den.empty()) normalize(out);
    return out;
}

ExprNode negate(const ExprNode& a) { return ExprNode{scale(a.num, Rational(-1)), a.den}; }

ExprNode inverse(const ExprNode& a) {
    if (a.num.is_zero()) throw DomainError("division by an expression that is identically zero");
    Decomposition d = decompose(a.num);
    ExprNode out{scale(den_product(a.den), Rational(1) / d.coef), {}};
    for (const Factor& f : d.mono) insert_den(out.den, Poly::of_atom(f.atom), f.exp);
    if (d.rest) insert_den(out.den, *d.rest, 1);
    normalize(out);
    return out;
}

ExprNode power(const ExprNode& a, int n) {
    if (n < 0) return power(inverse(a), -n);
    ExprNode out = node_of(Poly::constant(1));
    for (int k = 0; k < n; ++k) out = mul(out, a);
    return out;
}

ExprNode make_function(Func f, const ExprNode& argument) {
    if (argument.den.empty() && argument.num.is_constant()) {
        const Rational c = argument.num.constant_value();
        if (c == 0 && f == Func::exp) return node_of(Poly::constant(1));
        if (c == 0 && f == Func::sin) return node_of({});
        if (c == 0 && f == Func::cos) return node_of(Poly::constant(1));
        if (c == 1 && f == Func::log) return node_of({});
    }
    return node_of(Poly::of_atom(Atom::function(f, std::make_shared<const ExprNode>(argument))));
}

}  // namespace detail

using detail::ExprNode;
using detail::Poly;

namespace {

const std::shared_ptr<const ExprNode>& zero_node() {
    static const auto z = std::make_shared<const ExprNode>();
    return z;
}

void collect_vars(const ExprNode& n, std::set<Var>& out);

void collect_vars(const Poly& p, std::set<Var>& out) {
    for (const auto& t : p.terms) {
        for (const auto& f : t.mono) {
            if (f.atom.is_var) {
                out.insert(f.atom.var);
            } else {
                collect_vars(*f.atom.arg, out);
            }
        }
    }
}

void collect_vars(const ExprNode& n, std::set<Var>& out) {
    collect_vars(n.num, out);
    for (const auto& f : n.den) collect_vars(f.base, out);
}

bool has_function_atoms(const Poly& p) {
    for (const auto& t : p.terms) {
        for (const auto& f : t.mono) {
            if (!f.atom.is_var) return true;
        }
    }
    return false;
}

// Rebuilds an expression replacing each atom through `map_atom`.
template <class MapAtom>
ExprNode rebuild_poly(const Poly& p, MapAtom&& map_atom) {
    ExprNode acc;
    for (const auto& t : p.terms) {
        ExprNode term = detail::node_of(Poly::constant(t.coef));
        for (const auto& f : t.mono) term = detail::mul(term, detail::power(map_atom(f.atom), f.exp));
        acc = detail::add(acc, term);
    }
    return acc;
}

template <class MapAtom>
ExprNode rebuild(const ExprNode& n, MapAtom&& map_atom) {
    ExprNode out = rebuild_poly(n.num, map_atom);
    for (const auto& f : n.den) out = detail::mul(out, detail::power(rebuild_poly(f.base, map_atom), -f.exp));
    return out;
}

ExprNode atom_node(const detail::Atom& a) { return detail::node_of(Poly::of_atom(a)); }

ExprNode diff_node(const ExprNode& n, Var v);

ExprNode diff_atom(const detail::Atom& a, Var v) {
    if (a.is_var) return detail::node_of(Poly::constant(a.var == v ? 1 : 0));
    ExprNode inner = diff_node(*a.arg, v);
    if (inner.num.is_zero()) return {};
    ExprNode outer;
    switch (a.fn) {
        case Func::exp: outer = atom_node(a); break;
        case Func::log: outer = detail::inverse(*a.arg); break;
        case Func::sin: outer = detail::make_function(Func::cos, *a.arg); break;
        case Func::cos: outer = detail::negate(detail::make_function(Func::sin, *a.arg)); break;
    }
    return detail::mul(outer, inner);
}

ExprNode diff_poly(const Poly& p, Var v) {
    ExprNode acc;
    for (const auto& t : p.terms) {
        for (std::size_t k = 0; k < t.mono.size(); ++k) {
            const auto& f = t.mono[k];
            ExprNode da = diff_atom(f.atom, v);
            if (da.num.is_zero()) continue;
            detail::Monomial rest = t.mono;
            if (f.exp == 1) {
                rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
            } else {
                rest[k].exp -= 1;
            }
            Poly coef;
            coef.terms.push_back(detail::Term{std::move(rest), t.coef * f.exp});
            acc = detail::add(acc, detail::mul(detail::node_of(coef), da));
        }
    }
    return acc;
}

ExprNode diff_node(const ExprNode& n, Var v) {
    ExprNode den_inv = detail::node_of(Poly::constant(1));
    for (const auto& f : n.den) den_inv.den.push_back(f);
    ExprNode out = detail::mul(diff_poly(n.num, v), den_inv);
    // d(1/Π dₖ^eₖ) = −Σ eₖ dₖ' / (dₖ · Π dⱼ^eⱼ)
    for (const auto& f : n.den) {
        ExprNode dk = diff_poly(f.base, v);
        if (dk.num.is_zero()) continue;
        ExprNode extra = detail::node_of(Poly::constant(1));
        extra.den.push_back(detail::DenFactor{f.base, 1});
        ExprNode term = detail::mul(detail::mul(dk, extra), den_inv);
        term = detail::mul(term, detail::node_of(Poly::constant(-f.exp)));
        out = detail::add(out, detail::mul(detail::node_of(n.num), term));
    }
    return out;
}

double eval_node(const ExprNode& n, const Bindings& b);

double apply_func(Func f, double a) {
    switch (f) {
        case Func::exp: return std::exp(a);
        case Func::log:
            if (!(a > 0.0)) throw DomainError("log of a non-positive value");
            return std::log(a);
        case Func::sin: return std::sin(a);
        case Func::cos: return std::cos(a);
    }
    return 0.0;
}

double ipow(double base, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= base;
    return r;
}

double eval_poly(const Poly& p, const Bindings& b) {
    double s = 0.0;
    for (const auto& t : p.terms) {
        double v = static_cast<double>(t.coef);
        for (const auto& f : t.mono) {
            double a;
            if (f.atom.is_var) {
                auto it = b.find(f.atom.var);
                if (it == b.end()) throw MissingBinding("no value bound for " + std::string(to_string(f.atom.var)));
                a = it->second;
            } else {
                a = apply_func(f.atom.fn, eval_node(*f.atom.arg, b));
            }
            v *= ipow(a, f.exp);
        }
        s += v;
    }
    return s;
}

double eval_node(const ExprNode& n, const Bindings& b) {
    double v = eval_poly(n.num, b);
    for (const auto& f : n.den) {
        const double d = ipow(eval_poly(f.base, b), f.exp);
        if (d == 0.0) throw DomainError("zero denominator");
        v /= d;
    }
    return v;
}

std::string rational_str(const Rational& r) {
    std::ostringstream os;
    os << numerator(r);
    if (denominator(r) != 1) os << '/' << denominator(r);
    return os.str();
}

std::string node_str(const ExprNode& n);

std::string atom_str(const detail::Atom& a) {
    if (a.is_var) return std::string(to_string(a.var));
    return std::string(to_string(a.fn)) + "(" + node_str(*a.arg) + ")";
}

std::string poly_str(const Poly& p) {
    if (p.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : p.terms) {
        std::string mono;
        for (const auto& f : t.mono) {
            if (!mono.empty()) mono += '*';
            mono += atom_str(f.atom);
            if (f.exp != 1) mono += '^' + std::to_string(f.exp);
        }
        const bool negative = t.coef < 0;
        const Rational mag = negative ? Rational(-t.coef) : t.coef;
        std::string body;
        if (mono.empty()) {
            body = rational_str(mag);
        } else if (mag == 1) {
            body = mono;
        } else {
            body = rational_str(mag) + "*" + mono;
        }
        if (first) {
            out = negative ? "-" + body : body;
        } else {
            out += negative ? " - " : " + ";
            out += body;
        }
        first = false;
    }
    return out;
}

std::string node_str(const ExprNode& n) {
    if (n.den.empty()) return poly_str(n.num);
    std::string out = "(" + poly_str(n.num) + ")";
    for (const auto& f : n.den) {
        out += "/(" + poly_str(f.base) + ")";
        if (f.exp != 1) out += "^" + std::to_string(f.exp);
    }
    return out;
}

}  // namespace

Expr::Expr() : node_(zero_node()) {}

Expr::Expr(long long value)
    : node_(std::make_shared<const ExprNode>(detail::node_of(Poly::constant(Rational(value))))) {}

Expr::Expr(Var v) : node_(std::make_shared<const ExprNode>(atom_node(detail::Atom::variable(v)))) {}

Expr::Expr(const Rational& value)
    : node_(std::make_shared<const ExprNode>(detail::node_of(Poly::constant(value)))) {}

Expr::Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

Expr Expr::apply(Func f, const Expr& argument) { return detail::wrap(detail::make_function(f, argument.node())); }

Expr operator+(const Expr& a, const Expr& b) { return detail::wrap(detail::add(a.node(), b.node())); }
Expr operator-(const Expr& a, const Expr& b) {
    return detail::wrap(detail::add(a.node(), detail::negate(b.node())));
}
Expr operator*(const Expr& a, const Expr& b) { return detail::wrap(detail::mul(a.node(), b.node())); }
Expr operator/(const Expr& a, const Expr& b) {
    return detail::wrap(detail::mul(a.node(), detail::inverse(b.node())));
}
Expr operator-(const Expr& a) { return detail::wrap(detail::negate(a.node())); }

Expr Expr::pow(int exponent) const { return detail::wrap(detail::power(node(), exponent)); }

bool Expr::is_zero() const { return node_->num.is_zero(); }

bool Expr::is_constant() const { return node_->den.empty() && node_->num.is_constant(); }

std::optional<Rational> Expr::constant_value() const {
    if (!is_constant()) return std::nullopt;
    return node_->num.constant_value();
}

bool Expr::is_polynomial() const { return node_->den.empty() && !has_function_atoms(node_->num); }

bool Expr::has_functions() const {
    if (has_function_atoms(node_->num)) return true;
    return std::any_of(node_->den.begin(), node_->den.end(),
                       [](const detail::DenFactor& f) { return has_function_atoms(f.base); });
}

std::set<Var> Expr::variables() const {
    std::set<Var> out;
    collect_vars(*node_, out);
    return out;
}

bool Expr::mentions(Var v) const { return variables().contains(v); }

int Expr::degree(Var v) const {
    for (const auto& f : node_->den) {
        std::set<Var> vs;
        collect_vars(f.base, vs);
        if (vs.contains(v)) throw NotAffine(std::string(to_string(v)) + " occurs in a denominator");
    }
    int deg = 0;
    for (const auto& t : node_->num.terms) {
        for (const auto& f : t.mono) {
            if (f.atom.is_var) {
                if (f.atom.var == v) deg = std::max(deg, f.exp);
            } else {
                std::set<Var> vs;
                collect_vars(*f.atom.arg, vs);
                if (vs.contains(v)) throw NotAffine(std::string(to_string(v)) + " occurs inside a function node");
            }
        }
    }
    return deg;
}

std::string Expr::str() const { return node_str(*node_); }

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_ || detail::compare(a.node(), b.node()) == 0) return true;
    // Denominator factorisations are not unique; fall back to a zero test of the difference.
    if (a.node().den.empty() && b.node().den.empty()) return false;
    return (a - b).is_zero();
}

std::strong_ordering operator<=>(const Expr& a, const Expr& b) {
    const int c = detail::compare(a.node(), b.node());
    if (c < 0) return std::strong_ordering::less;
    if (c > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << e.str(); }

Expr exp(const Expr& e) { return Expr::apply(Func::exp, e); }
Expr log(const Expr& e) { return Expr::apply(Func::log, e); }
Expr sin(const Expr& e) { return Expr::apply(Func::sin, e); }
Expr cos(const Expr& e) { return Expr::apply(Func::cos, e); }

Expr differentiate(const Expr& e, Var v) { return detail::wrap(diff_node(e.node(), v)); }

Expr poisson_bracket(const Expr& a, const Expr& b) {
    return differentiate(a, Var::x) * differentiate(b, Var::p_x) - differentiate(b, Var::x) * differentiate(a, Var::p_x) +
           differentiate(a, Var::u) * differentiate(b, Var::p_u) - differentiate(b, Var::u) * differentiate(a, Var::p_u);
}

Expr substitute(const Expr& e, Var v, const Expr& replacement) {
    if (!e.mentions(v)) return e;
    std::function<ExprNode(const ExprNode&)> go;
    auto map_atom = [&](const detail::Atom& a) -> ExprNode {
        if (a.is_var) return a.var == v ? replacement.node() : atom_node(a);
        return detail::make_function(a.fn, go(*a.arg));
    };
    go = [&](const ExprNode& n) { return rebuild(n, map_atom); };
    return detail::wrap(go(e.node()));
}

double evaluate(const Expr& e, const Bindings& bindings) { return eval_node(e.node(), bindings); }

std::vector<Expr> coefficients(const Expr& e, Var v) {
    const int deg = e.degree(v);
    std::vector<Poly> parts(static_cast<std::size_t>(deg) + 1);
    for (const auto& t : e.node().num.terms) {
        int k = 0;
        detail::Monomial rest;
        for (const auto& f : t.mono) {
            if (f.atom.is_var && f.atom.var == v) {
                k = f.exp;
            } else {
                rest.push_back(f);
            }
        }
        // Removing one variable keeps the relative lex order within a fixed power of v.
        parts[static_cast<std::size_t>(k)].terms.push_back(detail::Term{std::move(rest), t.coef});
    }
    std::vector<Expr> out;
    out.reserve(parts.size());
    for (auto& p : parts) {
        ExprNode n{std::move(p), e.node().den};
        detail::normalize(n);
        out.push_back(detail::wrap(std::move(n)));
    }
    return out;
}

Expr solve_affine(const Expr& e, Var v) {
    const int deg = e.degree(v);
    if (deg > 1) {
        throw NotAffine("expression has degree " + std::to_string(deg) + " in " + std::string(to_string(v)));
    }
    if (deg == 0) throw DegenerateError("coefficient of " + std::string(to_string(v)) + " vanishes identically");
    const auto c = coefficients(e, v);
    return -c[0] / c[1];
}

// ---------------------------------------------------------------------------
// NumericExpr

struct NumericExpr::Program {
    struct CompiledPoly {
        std::vector<double> coef;
        std::vector<std::uint32_t> start;  // size coef.size() + 1
        std::vector<std::pair<std::uint16_t, std::uint16_t>> factors;  // (slot, exponent)
    };
    std::vector<std::pair<Func, std::shared_ptr<const Program>>> functions;  // slot 5 + k
    CompiledPoly num;
    std::vector<std::pair<CompiledPoly, int>> den;

    double eval(const std::array<double, 5>& point) const;
};

namespace {

using Program = NumericExpr::Program;

struct AtomLess {
    bool operator()(const detail::Atom& a, const detail::Atom& b) const { return detail::compare(a, b) < 0; }
};

std::shared_ptr<const Program> compile(const ExprNode& n);

struct Compiler {
    Program prog;
    std::map<detail::Atom, std::uint16_t, AtomLess> slots;

    std::uint16_t slot_of(const detail::Atom& a) {
        if (a.is_var) return static_cast<std::uint16_t>(a.var);
        auto it = slots.find(a);
        if (it != slots.end()) return it->second;
        const auto s = static_cast<std::uint16_t>(5 + prog.functions.size());
        prog.functions.emplace_back(a.fn, compile(*a.arg));
        slots.emplace(a, s);
        return s;
    }

    Program::CompiledPoly poly(const Poly& p) {
        Program::CompiledPoly c;
        c.start.push_back(0);
        for (const auto& t : p.terms) {
            c.coef.push_back(static_cast<double>(t.coef));
            for (const auto& f : t.mono) c.factors.emplace_back(slot_of(f.atom), static_cast<std::uint16_t>(f.exp));
            c.start.push_back(static_cast<std::uint32_t>(c.factors.size()));
        }
        return c;
    }
};

std::shared_ptr<const Program> compile(const ExprNode& n) {
    Compiler c;
    c.prog.num = c.poly(n.num);
    for (const auto& f : n.den) c.prog.den.emplace_back(c.poly(f.base), f.exp);
    return std::make_shared<const Program>(std::move(c.prog));
}

double eval_compiled(const Program::CompiledPoly& p, const double* slots) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.coef.size(); ++k) {
        double v = p.coef[k];
        for (std::uint32_t j = p.start[k]; j < p.start[k + 1]; ++j) v *= ipow(slots[p.factors[j].first], p.factors[j].second);
        s += v;
    }
    return s;
}

}  // namespace

double NumericExpr::Program::eval(const std::array<double, 5>& point) const {
    constexpr std::size_t kInline = 16;
    std::array<double, kInline> inline_slots{};
    std::vector<double> heap_slots;
    double* slots = inline_slots.data();
    if (5 + functions.size() > kInline) {
        heap_slots.resize(5 + functions.size());
        slots = heap_slots.data();
    }
    std::copy(point.begin(), point.end(), slots);
    for (std::size_t k = 0; k < functions.size(); ++k) {
        slots[5 + k] = apply_func(functions[k].first, functions[k].second->eval(point));
    }
    double v = eval_compiled(num, slots);
    for (const auto& [p, e] : den) {
        const double d = ipow(eval_compiled(p, slots), e);
        if (d == 0.0) throw DomainError("zero denominator");
        v /= d;
    }
    return v;
}

NumericExpr::NumericExpr() : NumericExpr(Expr()) {}

NumericExpr::NumericExpr(const Expr& e) : program_(compile(e.node())) {}

double NumericExpr::operator()(const std::array<double, 5>& point) const { return program_->eval(point); }

}  // namespace dynopt
