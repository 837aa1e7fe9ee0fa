#pragma once

// Exact symbolic expressions over the canonical phase space (x, u, p_x, p_u, t).
//
// Every Expr is kept in a normal form N / (d₁^e₁ ··· d_k^e_k): N is an expanded
// polynomial with exact rational coefficients, the dᵢ are monic, non-constant
// polynomials with no common monomial factor. Polynomial "variables" are the five
// phase-space coordinates plus opaque smooth functions (exp, log, sin, cos) of
// other expressions. Because N is fully expanded, an expression is zero exactly
// when its numerator has no terms, and two polynomials are equal exactly when
// their normal forms are structurally equal.

#include <array>
#include <compare>
#include <iosfwd>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace dynopt {

using Rational = boost::multiprecision::cpp_rational;

/// Phase-space coordinates. (x, p_x) and (u, p_u) are canonical pairs; t is a parameter.
enum class Var : std::uint8_t { x = 0, u = 1, p_x = 2, p_u = 3, t = 4 };

inline constexpr std::array<Var, 5> kAllVars{Var::x, Var::u, Var::p_x, Var::p_u, Var::t};

std::string_view to_string(Var v);

enum class Func : std::uint8_t { exp = 0, log = 1, sin = 2, cos = 3 };

std::string_view to_string(Func f);

namespace detail {
struct ExprNode;
}

class Expr {
public:
    /// The zero expression.
    Expr();
    Expr(long long value);  // NOLINT(google-explicit-constructor)
    Expr(int value) : Expr(static_cast<long long>(value)) {}  // NOLINT
    Expr(Var v);                                            // NOLINT
    explicit Expr(const Rational& value);

    static Expr apply(Func f, const Expr& argument);

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    /// Throws DomainError when dividing by an expression that is identically zero.
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);

    Expr pow(int exponent) const;

    bool is_zero() const;
    bool is_constant() const;
    std::optional<Rational> constant_value() const;
    /// No denominators and no opaque function nodes.
    bool is_polynomial() const;
    bool has_functions() const;

    /// Every variable mentioned anywhere, including inside function arguments.
    std::set<Var> variables() const;
    bool mentions(Var v) const;

    /// Degree in `v` of a polynomial-structured expression; throws NotAffine when `v`
    /// occurs in a denominator or inside a function node.
    int degree(Var v) const;

    /// Canonical text. parse(e.str()) == e for every canonical e.
    std::string str() const;

    friend bool operator==(const Expr& a, const Expr& b);
    friend std::strong_ordering operator<=>(const Expr& a, const Expr& b);

    const detail::ExprNode& node() const { return *node_; }
    const std::shared_ptr<const detail::ExprNode>& node_ptr() const { return node_; }
    explicit Expr(std::shared_ptr<const detail::ExprNode> node);

private:
    std::shared_ptr<const detail::ExprNode> node_;
};

std::ostream& operator<<(std::ostream& os, const Expr& e);

Expr exp(const Expr& e);
Expr log(const Expr& e);
Expr sin(const Expr& e);
Expr cos(const Expr& e);

/// Parses the expression grammar: decimal/scientific literals, the variables
/// x, u, t, p_x, p_u, binary + - * / ^ (integer exponents, optionally negative),
/// unary minus, parentheses and exp/log/sin/cos. Throws ParseError/UnknownIdentifier.
Expr parse(std::string_view text);

Expr differentiate(const Expr& e, Var v);

/// {A,B} = ∂A/∂x ∂B/∂p_x − ∂B/∂x ∂A/∂p_x + ∂A/∂u ∂B/∂p_u − ∂B/∂u ∂A/∂p_u
Expr poisson_bracket(const Expr& a, const Expr& b);

Expr substitute(const Expr& e, Var v, const Expr& replacement);

using Bindings = std::map<Var, double>;

/// Floating evaluation. Throws MissingBinding or DomainError (log of a
/// non-positive value, zero denominator).
double evaluate(const Expr& e, const Bindings& bindings);

/// For e = a·v + b with a, b free of v, returns −b/a.
/// Throws NotAffine if deg_v(e) > 1 or v is not polynomial in e; DegenerateError if a ≡ 0.
Expr solve_affine(const Expr& e, Var v);

/// Polynomial coefficients of `v`: result[k] multiplies v^k. Same preconditions as degree().
std::vector<Expr> coefficients(const Expr& e, Var v);

/// Flattened double-precision evaluator for hot loops. Arguments are indexed by Var.
class NumericExpr {
public:
    NumericExpr();
    explicit NumericExpr(const Expr& e);

    double operator()(const std::array<double, 5>& point) const;
    double operator()(double x, double u, double p_x, double p_u, double t) const {
        return (*this)({x, u, p_x, p_u, t});
    }

    struct Program;

private:
    std::shared_ptr<const Program> program_;
};

}  // namespace dynopt
