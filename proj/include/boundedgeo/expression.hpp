#pragma once

// Minimal arithmetic expression language used for conformal factors and
// graph functions:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' integer)?
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | sqrt | log
//
// Names resolve to variables (bound by position at parse time), named
// parameters, or the constant `pi`. Evaluation is templated on the scalar so
// the same tree evaluates on double and on HyperDual<N>.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "hyperdual.hpp"

namespace boundedgeo {

using ParameterMap = std::map<std::string, double>;

class Expression {
public:
    enum class Kind { constant, variable, add, sub, mul, div, neg, pow_int, sin, cos, exp, sqrt, log };

    Expression() = default;

    static Expression parse(std::string_view text, const std::vector<std::string>& variables,
                            const ParameterMap& parameters = {}) {
        Parser p{text, variables, parameters};
        Expression e;
        e.text_ = std::string(text);
        e.variables_ = variables;
        e.root_ = p.parse_all(e.nodes_);
        return e;
    }

    static Expression constant(double value, const std::vector<std::string>& variables = {}) {
        Expression e;
        e.text_ = std::to_string(value);
        e.variables_ = variables;
        e.nodes_.push_back({Kind::constant, value, 0, -1, -1});
        e.root_ = 0;
        return e;
    }

    template <class T>
    T eval(std::span<const T> vars) const {
        return eval_node<T>(root_, vars);
    }

    double operator()(std::span<const double> vars) const { return eval<double>(vars); }
    double operator()(std::initializer_list<double> vars) const {
        return eval<double>(std::span<const double>(vars.begin(), vars.size()));
    }

    // Value, gradient and Hessian with respect to all variables.
    template <int N>
    HyperDual<N> jet(std::span<const double> at) const {
        std::array<HyperDual<N>, N> x;
        for (int i = 0; i < N; ++i) x[i] = HyperDual<N>::variable(at[i], i);
        return eval<HyperDual<N>>(std::span<const HyperDual<N>>(x.data(), N));
    }

    bool is_constant() const {
        for (const auto& n : nodes_)
            if (n.kind == Kind::variable) return false;
        return !nodes_.empty();
    }
    bool empty() const { return nodes_.empty(); }
    const std::string& text() const { return text_; }
    const std::vector<std::string>& variables() const { return variables_; }

private:
    struct Node {
        Kind kind;
        double value;  // constant value, or integer exponent for pow_int
        int index;     // variable index
        int lhs;
        int rhs;
    };

    struct Parser {
        std::string_view s;
        const std::vector<std::string>& vars;
        const ParameterMap& params;
        std::size_t pos = 0;

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        [[noreturn]] void fail(const std::string& what) const {
            throw ParseError("expression '" + std::string(s) + "': " + what, pos);
        }

        int add(std::vector<Node>& nodes, Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size()) - 1;
        }

        int parse_all(std::vector<Node>& nodes) {
            skip();
            if (pos >= s.size()) fail("empty expression");
            int root = expr(nodes);
            skip();
            if (pos < s.size()) fail(std::string("unexpected '") + s[pos] + "'");
            return root;
        }

        int expr(std::vector<Node>& nodes) {
            int lhs = term(nodes);
            for (;;) {
                if (accept('+'))
                    lhs = add(nodes, {Kind::add, 0, 0, lhs, term(nodes)});
                else if (accept('-'))
                    lhs = add(nodes, {Kind::sub, 0, 0, lhs, term(nodes)});
                else
                    return lhs;
            }
        }

        int term(std::vector<Node>& nodes) {
            int lhs = unary(nodes);
            for (;;) {
                if (accept('*'))
                    lhs = add(nodes, {Kind::mul, 0, 0, lhs, unary(nodes)});
                else if (accept('/'))
                    lhs = add(nodes, {Kind::div, 0, 0, lhs, unary(nodes)});
                else
                    return lhs;
            }
        }

        int unary(std::vector<Node>& nodes) {
            if (accept('-')) return add(nodes, {Kind::neg, 0, 0, unary(nodes), -1});
            if (accept('+')) return unary(nodes);
            return power(nodes);
        }

        int power(std::vector<Node>& nodes) {
            int base = primary(nodes);
            if (accept('^')) {
                skip();
                std::size_t start = pos;
                bool negative = accept('-');
                skip();
                std::size_t digits = pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                if (digits == pos) {
                    pos = start;
                    fail("exponent must be an integer literal");
                }
                int e = std::atoi(std::string(s.substr(digits, pos - digits)).c_str());
                return add(nodes, {Kind::pow_int, static_cast<double>(negative ? -e : e), 0, base, -1});
            }
            return base;
        }

        int primary(std::vector<Node>& nodes) {
            skip();
            if (pos >= s.size()) fail("unexpected end of expression");
            char c = s[pos];
            if (c == '(') {
                ++pos;
                int inner = expr(nodes);
                if (!accept(')')) fail("expected ')'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                char* end = nullptr;
                std::string buf(s.substr(pos));
                double v = std::strtod(buf.c_str(), &end);
                std::size_t used = static_cast<std::size_t>(end - buf.c_str());
                if (used == 0) fail("malformed number");
                pos += used;
                return add(nodes, {Kind::constant, v, 0, -1, -1});
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos;
                while (pos < s.size() &&
                       (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                    ++pos;
                std::string name(s.substr(start, pos - start));
                skip();
                if (pos < s.size() && s[pos] == '(') {
                    Kind k;
                    if (name == "sin")
                        k = Kind::sin;
                    else if (name == "cos")
                        k = Kind::cos;
                    else if (name == "exp")
                        k = Kind::exp;
                    else if (name == "sqrt")
                        k = Kind::sqrt;
                    else if (name == "log")
                        k = Kind::log;
                    else {
                        pos = start;
                        fail("unknown function '" + name + "'");
                    }
                    ++pos;
                    int arg = expr(nodes);
                    if (!accept(')')) fail("expected ')'");
                    return add(nodes, {k, 0, 0, arg, -1});
                }
                for (std::size_t i = 0; i < vars.size(); ++i)
                    if (vars[i] == name) return add(nodes, {Kind::variable, 0, static_cast<int>(i), -1, -1});
                if (auto it = params.find(name); it != params.end())
                    return add(nodes, {Kind::constant, it->second, 0, -1, -1});
                if (name == "pi") return add(nodes, {Kind::constant, std::numbers::pi, 0, -1, -1});
                pos = start;
                fail("unknown name '" + name + "'");
            }
            fail(std::string("unexpected '") + c + "'");
        }
    };

    template <class T>
    T eval_node(int i, std::span<const T> vars) const {
        using std::cos, std::exp, std::log, std::sin, std::sqrt;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.kind) {
            case Kind::constant: return T(n.value);
            case Kind::variable: return vars[static_cast<std::size_t>(n.index)];
            case Kind::add: return eval_node<T>(n.lhs, vars) + eval_node<T>(n.rhs, vars);
            case Kind::sub: return eval_node<T>(n.lhs, vars) - eval_node<T>(n.rhs, vars);
            case Kind::mul: return eval_node<T>(n.lhs, vars) * eval_node<T>(n.rhs, vars);
            case Kind::div: return eval_node<T>(n.lhs, vars) / eval_node<T>(n.rhs, vars);
            case Kind::neg: return -eval_node<T>(n.lhs, vars);
            case Kind::pow_int: {
                T b = eval_node<T>(n.lhs, vars);
                int e = static_cast<int>(n.value);
                T r(1.0);
                for (int k = 0; k < std::abs(e); ++k) r = r * b;
                return e < 0 ? T(1.0) / r : r;
            }
            case Kind::sin: return sin(eval_node<T>(n.lhs, vars));
            case Kind::cos: return cos(eval_node<T>(n.lhs, vars));
            case Kind::exp: return exp(eval_node<T>(n.lhs, vars));
            case Kind::sqrt: return sqrt(eval_node<T>(n.lhs, vars));
            case Kind::log: return log(eval_node<T>(n.lhs, vars));
        }
        return T(0.0);
    }

    std::string text_;
    std::vector<std::string> variables_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Evaluates a constant expression (extents, parameters written as "2*pi").
inline double eval_constant(std::string_view text, const ParameterMap& parameters = {}) {
    auto e = Expression::parse(text, {}, parameters);
    return e(std::span<const double>{});
}

}  // namespace boundedgeo
