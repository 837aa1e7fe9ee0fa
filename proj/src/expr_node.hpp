#pragma once

// Internal representation behind dynopt::Expr. Not installed.

#include <memory>
#include <optional>
#include <vector>

#include "dynopt/expr.hpp"

namespace dynopt::detail {

struct ExprNode;

/// A polynomial indeterminate: a phase-space variable or an opaque function node.
struct Atom {
    bool is_var = true;
    Var var = Var::x;
    Func fn = Func::exp;
    std::shared_ptr<const ExprNode> arg;

    static Atom variable(Var v) { return Atom{true, v, Func::exp, nullptr}; }
    static Atom function(Func f, std::shared_ptr<const ExprNode> a) {
        return Atom{false, Var::x, f, std::move(a)};
    }
};

/// Variables come first (x, u, p_x, p_u, t), then function nodes by (kind, argument).
int compare(const Atom& a, const Atom& b);

struct Factor {
    Atom atom;
    int exp = 1;
};

/// Factors in ascending atom order, all exponents positive.
using Monomial = std::vector<Factor>;

/// Lexicographic monomial order; positive when `a` ranks above `b`.
int compare_lex(const Monomial& a, const Monomial& b);

struct Term {
    Monomial mono;
    Rational coef;
};

/// Expanded polynomial: terms in descending monomial order, no zero coefficients.
struct Poly {
    std::vector<Term> terms;

    static Poly constant(const Rational& c);
    static Poly of_atom(const Atom& a);

    bool is_zero() const { return terms.empty(); }
    bool is_constant() const { return terms.empty() || (terms.size() == 1 && terms[0].mono.empty()); }
    Rational constant_value() const { return terms.empty() ? Rational(0) : terms[0].coef; }
};

int compare(const Poly& a, const Poly& b);

Poly add(const Poly& a, const Poly& b);
Poly scale(const Poly& a, const Rational& c);
Poly mul(const Poly& a, const Poly& b);
Poly power(const Poly& a, int n);
/// Quotient when `d` divides `p` exactly, otherwise nullopt.
std::optional<Poly> divide_exact(const Poly& p, const Poly& d);

struct DenFactor {
    Poly base;
    int exp = 1;
};

struct ExprNode {
    Poly num;
    std::vector<DenFactor> den;  // ascending by compare(Poly), exponents positive
};

int compare(const ExprNode& a, const ExprNode& b);

/// Cancels denominator factors that divide the numerator exactly.
void normalize(ExprNode& n);
ExprNode node_of(const Poly& p);
ExprNode add(const ExprNode& a, const ExprNode& b);
ExprNode mul(const ExprNode& a, const ExprNode& b);
ExprNode negate(const ExprNode& a);
ExprNode inverse(const ExprNode& a);
ExprNode power(const ExprNode& a, int n);
ExprNode make_function(Func f, const ExprNode& argument);

inline Expr wrap(ExprNode n) { return Expr(std::make_shared<const ExprNode>(std::move(n))); }

}  // namespace dynopt::detail
