#include <cctype>
#include <cstdlib>
#include <string>

#include "dynopt/errors.hpp"
#include "dynopt/expr.hpp"

namespace dynopt {

namespace {

// Recursive descent over
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' exponent)?
//   exponent:= '-'? integer | '(' '-'? integer ')'
//   primary := number | identifier | function '(' expr ')' | '(' expr ')'
class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr run() {
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr expr() {
        Expr acc = term();
        for (;;) {
            if (accept('+')) {
                acc = acc + term();
            } else if (accept('-')) {
                acc = acc - term();
            } else {
                return acc;
            }
        }
    }

    Expr term() {
        Expr acc = unary();
        for (;;) {
            if (accept('*')) {
                acc = acc * unary();
            } else if (accept('/')) {
                skip_ws();
                const std::size_t at = pos_;
                Expr d = unary();
                if (d.is_zero()) throw ParseError("division by zero", at);
                acc = acc / d;
            } else {
                return acc;
            }
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (!accept('^')) return base;
        const bool parenthesized = accept('(');
        const bool negative = accept('-');
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("expected an integer exponent");
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
            fail("exponents must be integers");
        }
        if (pos_ - start > 6) fail("exponent too large");
        int n = std::stoi(std::string(text_.substr(start, pos_ - start)));
        if (negative) n = -n;
        if (parenthesized) expect(')');
        if (n < 0 && base.is_zero()) throw ParseError("division by zero", start);
        return base.pow(n);
    }

    Expr number() {
        const std::size_t start = pos_;
        Rational value = 0;
        bool digits = false;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + (text_[pos_++] - '0');
            digits = true;
        }
        int scale = 0;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                value = value * 10 + (text_[pos_++] - '0');
                --scale;
                digits = true;
            }
        }
        if (!digits) throw ParseError("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            bool neg = false;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) neg = text_[p++] == '-';
            const std::size_t e0 = p;
            while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) ++p;
            if (p == e0) throw ParseError("malformed exponent in number", pos_);
            if (p - e0 > 4) throw ParseError("number exponent too large", pos_);
            const int e = std::stoi(std::string(text_.substr(e0, p - e0)));
            scale += neg ? -e : e;
            pos_ = p;
        }
        Rational ten_pow = 1;
        for (int k = 0; k < std::abs(scale); ++k) ten_pow *= 10;
        if (scale >= 0) return Expr(Rational(value * ten_pow));
        return Expr(Rational(value / ten_pow));
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view id = text_.substr(start, pos_ - start);
            for (Var v : kAllVars) {
                if (id == to_string(v)) return Expr(v);
            }
            for (Func f : {Func::exp, Func::log, Func::sin, Func::cos}) {
                if (id == to_string(f)) {
                    expect('(');
                    Expr arg = expr();
                    expect(')');
                    return Expr::apply(f, arg);
                }
            }
            throw UnknownIdentifier("unknown identifier '" + std::string(id) + "'", start);
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

}  // namespace dynopt
