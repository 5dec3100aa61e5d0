#pragma once

#include <memory>
#include <string>

namespace bdsde {

/// Parsed arithmetic expression over the variables t, x, y, z.
///
/// Grammar (documented contract for scenario files):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := atom ('^' unary)?          (right associative)
///   atom    := number | variable | call | '(' expr ')'
///   call    := ('abs' | 'exp' | 'min' | 'max') '(' expr (',' expr)? ')'
///   variable:= 't' | 'x' | 'y' | 'z'
///
/// Evaluation order is fixed left-to-right; numbers parse as decimal with no
/// locale effects.
class Expr {
public:
    static Expr parse(const std::string& text);

    double eval(double t, double x, double y, double z) const;
    const std::string& text() const { return text_; }

    Expr() = default;

    struct Node; // parse-tree node, opaque to callers

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

} // namespace bdsde
