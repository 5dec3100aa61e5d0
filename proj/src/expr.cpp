#include "bdsde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "bdsde/errors.hpp"

namespace bdsde {

namespace {
enum class Op { num, var, add, sub, mul, div, pow, neg, abs, expf, minf, maxf };
} // namespace

struct Expr::Node {
    Op op;
    double num = 0.0;
    int var = 0; // 0=t 1=x 2=y 3=z
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != s_.size())
            throw config_error("expression: trailing input at position " + std::to_string(pos_));
        return e;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }
    bool consume(char c) {
        if (peek() == c) { ++pos_; return true; }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw config_error("expression: " + what + " at position " + std::to_string(pos_) +
                           " in \"" + s_ + "\"");
    }

    static NodePtr mk(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
        auto n = std::make_shared<Expr::Node>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (consume('+')) lhs = mk(Op::add, lhs, term());
            else if (consume('-')) lhs = mk(Op::sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (consume('*')) lhs = mk(Op::mul, lhs, unary());
            else if (consume('/')) lhs = mk(Op::div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (consume('-')) return mk(Op::neg, unary());
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        if (consume('^')) return mk(Op::pow, base, unary());
        return base;
    }

    NodePtr atom() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            if (!consume(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return ident();
        fail("unexpected character");
    }

    NodePtr number() {
        skip_ws();
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<Expr::Node>();
        n->op = Op::num;
        n->num = v;
        return n;
    }

    NodePtr ident() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        const std::string name = s_.substr(start, pos_ - start);
        if (name == "t" || name == "x" || name == "y" || name == "z") {
            auto n = std::make_shared<Expr::Node>();
            n->op = Op::var;
            n->var = name == "t" ? 0 : name == "x" ? 1 : name == "y" ? 2 : 3;
            return n;
        }
        if (name == "abs" || name == "exp") {
            if (!consume('(')) fail("expected '(' after " + name);
            NodePtr a = expr();
            if (!consume(')')) fail("missing ')'");
            return mk(name == "abs" ? Op::abs : Op::expf, a);
        }
        if (name == "min" || name == "max") {
            if (!consume('(')) fail("expected '(' after " + name);
            NodePtr a = expr();
            if (!consume(',')) fail("expected ',' in " + name);
            NodePtr b = expr();
            if (!consume(')')) fail("missing ')'");
            return mk(name == "min" ? Op::minf : Op::maxf, a, b);
        }
        fail("unknown identifier '" + name + "'");
    }
};

double eval_node(const Expr::Node* n, double t, double x, double y, double z) {
    switch (n->op) {
        case Op::num: return n->num;
        case Op::var: return n->var == 0 ? t : n->var == 1 ? x : n->var == 2 ? y : z;
        case Op::add: return eval_node(n->a.get(), t, x, y, z) + eval_node(n->b.get(), t, x, y, z);
        case Op::sub: return eval_node(n->a.get(), t, x, y, z) - eval_node(n->b.get(), t, x, y, z);
        case Op::mul: return eval_node(n->a.get(), t, x, y, z) * eval_node(n->b.get(), t, x, y, z);
        case Op::div: return eval_node(n->a.get(), t, x, y, z) / eval_node(n->b.get(), t, x, y, z);
        case Op::pow:
            return std::pow(eval_node(n->a.get(), t, x, y, z), eval_node(n->b.get(), t, x, y, z));
        case Op::neg: return -eval_node(n->a.get(), t, x, y, z);
        case Op::abs: return std::abs(eval_node(n->a.get(), t, x, y, z));
        case Op::expf: return std::exp(eval_node(n->a.get(), t, x, y, z));
        case Op::minf:
            return std::min(eval_node(n->a.get(), t, x, y, z), eval_node(n->b.get(), t, x, y, z));
        case Op::maxf:
            return std::max(eval_node(n->a.get(), t, x, y, z), eval_node(n->b.get(), t, x, y, z));
    }
    return 0.0;
}

} // namespace

Expr Expr::parse(const std::string& text) {
    Expr e;
    e.root_ = Parser(text).parse();
    e.text_ = text;
    return e;
}

double Expr::eval(double t, double x, double y, double z) const {
    if (!root_) throw config_error("expression: evaluating an empty expression");
    return eval_node(root_.get(), t, x, y, z);
}

} // namespace bdsde
