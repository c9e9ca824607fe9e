#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace homogfp {

// Evaluation point shared by coefficient callables and expressions.
struct EvalPoint {
    std::array<double, 2> x{0.0, 0.0};
    double t = 0.0;
    std::array<double, 2> y{0.0, 0.0};
    double tau = 0.0;
};

namespace detail {

struct ExprNode;
using NodePtr = std::shared_ptr<ExprNode>;

struct ExprNode {
    enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 } op;
    double value = 0.0;
    int var = -1;  // 0:x1 1:x2 2:t 3:y1 4:y2 5:tau
    double (*f1)(double) = nullptr;
    double (*f2)(double, double) = nullptr;
    NodePtr a, b;
};

inline double eval_node(const ExprNode& n, const EvalPoint& p) {
    switch (n.op) {
        case ExprNode::Op::Const: return n.value;
        case ExprNode::Op::Var:
            switch (n.var) {
                case 0: return p.x[0];
                case 1: return p.x[1];
                case 2: return p.t;
                case 3: return p.y[0];
                case 4: return p.y[1];
                default: return p.tau;
            }
        case ExprNode::Op::Neg: return -eval_node(*n.a, p);
        case ExprNode::Op::Add: return eval_node(*n.a, p) + eval_node(*n.b, p);
        case ExprNode::Op::Sub: return eval_node(*n.a, p) - eval_node(*n.b, p);
        case ExprNode::Op::Mul: return eval_node(*n.a, p) * eval_node(*n.b, p);
        case ExprNode::Op::Div: return eval_node(*n.a, p) / eval_node(*n.b, p);
        case ExprNode::Op::Pow: return std::pow(eval_node(*n.a, p), eval_node(*n.b, p));
        case ExprNode::Op::Call1: return n.f1(eval_node(*n.a, p));
        default: return n.f2(eval_node(*n.a, p), eval_node(*n.b, p));
    }
}

class ExprParser {
  public:
    ExprParser(const std::string& s, std::set<std::string>* used) : s_(s), used_(used) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("trailing characters");
        return e;
    }

  private:
    const std::string& s_;
    size_t pos_ = 0;
    std::set<std::string>* used_;

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("expression error at position " + std::to_string(pos_) + " in '" + s_ + "': " + what);
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool consume(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr a = term();
        for (;;) {
            if (consume('+')) {
                a = binary(ExprNode::Op::Add, a, term());
            } else if (consume('-')) {
                a = binary(ExprNode::Op::Sub, a, term());
            } else {
                return a;
            }
        }
    }
    NodePtr term() {
        NodePtr a = unary();
        for (;;) {
            if (consume('*')) {
                a = binary(ExprNode::Op::Mul, a, unary());
            } else if (consume('/')) {
                a = binary(ExprNode::Op::Div, a, unary());
            } else {
                return a;
            }
        }
    }
    NodePtr unary() {
        if (consume('-')) {
            auto n = std::make_shared<ExprNode>();
            n->op = ExprNode::Op::Neg;
            n->a = unary();
            return n;
        }
        (void)consume('+');
        return power();
    }
    NodePtr power() {
        NodePtr a = primary();
        if (consume('^')) return binary(ExprNode::Op::Pow, a, unary());  // right associative
        return a;
    }
    static NodePtr binary(ExprNode::Op op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<ExprNode>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        if (consume('(')) {
            NodePtr e = expr();
            if (!consume(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        size_t end = pos_;
        while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                                   s_[end] == 'e' || s_[end] == 'E' ||
                                   ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
                                    (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
            ++end;
        auto n = std::make_shared<ExprNode>();
        n->op = ExprNode::Op::Const;
        try {
            n->value = std::stod(s_.substr(pos_, end - pos_));
        } catch (...) {
            fail("malformed number");
        }
        pos_ = end;
        return n;
    }

    NodePtr ident() {
        size_t end = pos_;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
        const std::string name = s_.substr(pos_, end - pos_);
        pos_ = end;
        static const std::map<std::string, int> vars = {{"x", 0},  {"x1", 0}, {"x2", 1}, {"t", 2},
                                                        {"y", 3},  {"y1", 3}, {"y2", 4}, {"tau", 5}};
        static const std::map<std::string, double (*)(double)> fns1 = {
            {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
            {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
            {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
            {"abs", [](double v) { return std::fabs(v); }},  {"tanh", [](double v) { return std::tanh(v); }},
            {"floor", [](double v) { return std::floor(v); }}};
        static const std::map<std::string, double (*)(double, double)> fns2 = {
            {"pow", [](double a, double b) { return std::pow(a, b); }},
            {"min", [](double a, double b) { return a < b ? a : b; }},
            {"max", [](double a, double b) { return a > b ? a : b; }}};
        if (name == "pi") {
            auto n = std::make_shared<ExprNode>();
            n->op = ExprNode::Op::Const;
            n->value = 3.14159265358979323846;
            return n;
        }
        if (auto it = vars.find(name); it != vars.end()) {
            if (used_) used_->insert(name == "x" ? "x1" : (name == "y" ? "y1" : name));
            auto n = std::make_shared<ExprNode>();
            n->op = ExprNode::Op::Var;
            n->var = it->second;
            return n;
        }
        skip();
        if (auto it = fns1.find(name); it != fns1.end()) {
            if (!consume('(')) fail("expected '(' after " + name);
            auto n = std::make_shared<ExprNode>();
            n->op = ExprNode::Op::Call1;
            n->f1 = it->second;
            n->a = expr();
            if (!consume(')')) fail("expected ')'");
            return n;
        }
        if (auto it = fns2.find(name); it != fns2.end()) {
            if (!consume('(')) fail("expected '(' after " + name);
            auto n = std::make_shared<ExprNode>();
            n->op = ExprNode::Op::Call2;
            n->f2 = it->second;
            n->a = expr();
            if (!consume(',')) fail("expected ','");
            n->b = expr();
            if (!consume(')')) fail("expected ')'");
            return n;
        }
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace detail

// A parsed scalar expression of (x1,x2,t,y1,y2,tau).
class Expression {
  public:
    Expression() = default;
    explicit Expression(const std::string& text) : text_(text) {
        detail::ExprParser p(text, &used_);
        root_ = p.parse();
    }
    double operator()(const EvalPoint& p) const { return detail::eval_node(*root_, p); }
    bool valid() const { return static_cast<bool>(root_); }
    const std::set<std::string>& used_variables() const { return used_; }
    bool uses_any(std::initializer_list<const char*> names) const {
        for (const char* n : names)
            if (used_.count(n)) return true;
        return false;
    }
    const std::string& text() const { return text_; }

  private:
    std::string text_;
    detail::NodePtr root_;
    std::set<std::string> used_;
};

}  // namespace homogfp
