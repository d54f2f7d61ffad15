#include "chainflow/script.hpp"

#include <cctype>
#include <limits>

namespace chainflow::script {

std::string_view typeName(ValueType t) {
    switch (t) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "int";
        case ValueType::Text: return "text";
    }
    return "?";
}

std::optional<ValueType> typeFromName(std::string_view name) {
    if (name == "bool") return ValueType::Bool;
    if (name == "int") return ValueType::Int;
    if (name == "text" || name == "string") return ValueType::Text;
    return std::nullopt;
}

ValueType typeOf(const Value& v) { return static_cast<ValueType>(v.index()); }

Value defaultValue(ValueType t) {
    switch (t) {
        case ValueType::Bool: return false;
        case ValueType::Int: return std::int64_t{0};
        case ValueType::Text: return std::string();
    }
    return false;
}

std::string render(const Value& v) {
    switch (typeOf(v)) {
        case ValueType::Bool: return std::get<bool>(v) ? "true" : "false";
        case ValueType::Int: return std::to_string(std::get<std::int64_t>(v));
        case ValueType::Text: return "\"" + std::get<std::string>(v) + "\"";
    }
    return {};
}

namespace {

enum class Tok : std::uint8_t { End, Ident, Int, Str, True, False, Punct };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return cur_; }
    Token next() {
        Token t = cur_;
        advance();
        return t;
    }
    bool accept(std::string_view punct) {
        if (cur_.kind == Tok::Punct && cur_.text == punct) {
            advance();
            return true;
        }
        return false;
    }
    void expect(std::string_view punct) {
        if (!accept(punct)) throw CompileError("expected '" + std::string(punct) + "'", cur_.offset);
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        cur_ = Token{};
        cur_.offset = pos_;
        if (pos_ >= src_.size()) return;
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            auto start = pos_;
            while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            cur_.text = std::string(src_.substr(start, pos_ - start));
            cur_.kind = cur_.text == "true" ? Tok::True : cur_.text == "false" ? Tok::False : Tok::Ident;
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            auto start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            cur_.kind = Tok::Int;
            cur_.text = std::string(src_.substr(start, pos_ - start));
            return;
        }
        if (c == '"') {
            auto start = pos_++;
            std::string s;
            while (pos_ < src_.size() && src_[pos_] != '"') {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
                s.push_back(src_[pos_++]);
            }
            if (pos_ >= src_.size()) throw CompileError("unterminated string", start);
            ++pos_;
            cur_.kind = Tok::Str;
            cur_.text = std::move(s);
            return;
        }
        static constexpr std::string_view twoChar[] = {"&&", "||", "==", "!=", "<=", ">=", "->"};
        for (auto op : twoChar) {
            if (src_.substr(pos_, 2) == op) {
                cur_.kind = Tok::Punct;
                cur_.text = std::string(op);
                pos_ += 2;
                return;
            }
        }
        static constexpr std::string_view oneChar = "!<>+-*/()=;:{},";
        if (oneChar.find(c) != std::string_view::npos) {
            cur_.kind = Tok::Punct;
            cur_.text = std::string(1, c);
            ++pos_;
            return;
        }
        throw CompileError(std::string("unexpected character '") + c + "'", pos_);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token cur_;
};

using ExprPtr = std::unique_ptr<Expr>;

struct BinaryOp {
    std::string_view text;
    Expr::Op op;
    int precedence;
};

constexpr BinaryOp kBinary[] = {
    {"||", Expr::Op::Or, 1}, {"&&", Expr::Op::And, 2}, {"==", Expr::Op::Eq, 3}, {"!=", Expr::Op::Ne, 3},
    {"<", Expr::Op::Lt, 4},  {"<=", Expr::Op::Le, 4},  {">", Expr::Op::Gt, 4},  {">=", Expr::Op::Ge, 4},
    {"+", Expr::Op::Add, 5}, {"-", Expr::Op::Sub, 5},  {"*", Expr::Op::Mul, 6}, {"/", Expr::Op::Div, 6},
};

class ExprParser {
public:
    ExprParser(Lexer& lex, const Scope& scope) : lex_(lex), scope_(scope) {}

    ExprPtr parse(int minPrec = 1) {
        auto lhs = unary();
        for (;;) {
            const auto& t = lex_.peek();
            if (t.kind != Tok::Punct) break;
            const BinaryOp* found = nullptr;
            for (const auto& b : kBinary)
                if (b.text == t.text) found = &b;
            if (!found || found->precedence < minPrec) break;
            auto offset = t.offset;
            lex_.next();
            auto rhs = parse(found->precedence + 1);
            lhs = binary(found->op, std::move(lhs), std::move(rhs), offset);
        }
        return lhs;
    }

private:
    ExprPtr unary() {
        auto offset = lex_.peek().offset;
        if (lex_.accept("!")) {
            auto operand = unary();
            if (operand->type != ValueType::Bool) throw CompileError("'!' needs a bool operand", offset);
            return node(Expr::Op::Not, ValueType::Bool, std::move(operand));
        }
        if (lex_.accept("-")) {
            auto operand = unary();
            if (operand->type != ValueType::Int) throw CompileError("unary '-' needs an int operand", offset);
            return node(Expr::Op::Neg, ValueType::Int, std::move(operand));
        }
        return primary();
    }

    ExprPtr primary() {
        auto t = lex_.next();
        auto e = std::make_unique<Expr>();
        switch (t.kind) {
            case Tok::True:
            case Tok::False:
                e->type = ValueType::Bool;
                e->literal = t.kind == Tok::True;
                return e;
            case Tok::Int: {
                std::int64_t v = 0;
                for (char c : t.text) {
                    if (v > (std::numeric_limits<std::int64_t>::max() - (c - '0')) / 10)
                        throw CompileError("integer literal out of range", t.offset);
                    v = v * 10 + (c - '0');
                }
                e->type = ValueType::Int;
                e->literal = v;
                return e;
            }
            case Tok::Str:
                e->type = ValueType::Text;
                e->literal = t.text;
                return e;
            case Tok::Ident: {
                auto it = scope_.find(t.text);
                if (it == scope_.end()) throw CompileError("undeclared variable '" + t.text + "'", t.offset);
                e->op = Expr::Op::Var;
                e->type = it->second;
                e->name = t.text;
                return e;
            }
            case Tok::Punct:
                if (t.text == "(") {
                    auto inner = parse();
                    lex_.expect(")");
                    return inner;
                }
                [[fallthrough]];
            default:
                throw CompileError(t.kind == Tok::End ? "unexpected end of expression" : "unexpected '" + t.text + "'",
                                   t.offset);
        }
    }

    static ExprPtr node(Expr::Op op, ValueType type, ExprPtr lhs, ExprPtr rhs = nullptr) {
        auto e = std::make_unique<Expr>();
        e->op = op;
        e->type = type;
        e->lhs = std::move(lhs);
        e->rhs = std::move(rhs);
        return e;
    }

    static ExprPtr binary(Expr::Op op, ExprPtr lhs, ExprPtr rhs, std::size_t offset) {
        const auto lt = lhs->type, rt = rhs->type;
        switch (op) {
            case Expr::Op::Or:
            case Expr::Op::And:
                if (lt != ValueType::Bool || rt != ValueType::Bool) throw CompileError("logical operator needs bools", offset);
                return node(op, ValueType::Bool, std::move(lhs), std::move(rhs));
            case Expr::Op::Eq:
            case Expr::Op::Ne:
                if (lt != rt) throw CompileError("comparison of different types", offset);
                return node(op, ValueType::Bool, std::move(lhs), std::move(rhs));
            case Expr::Op::Lt:
            case Expr::Op::Le:
            case Expr::Op::Gt:
            case Expr::Op::Ge:
                if (lt != ValueType::Int || rt != ValueType::Int) throw CompileError("ordering needs ints", offset);
                return node(op, ValueType::Bool, std::move(lhs), std::move(rhs));
            case Expr::Op::Add:
                if (lt == ValueType::Text && rt == ValueType::Text)
                    return node(op, ValueType::Text, std::move(lhs), std::move(rhs));
                [[fallthrough]];
            default:
                if (lt != ValueType::Int || rt != ValueType::Int) throw CompileError("arithmetic needs ints", offset);
                return node(op, ValueType::Int, std::move(lhs), std::move(rhs));
        }
    }

    Lexer& lex_;
    const Scope& scope_;
};

std::int64_t checked(bool overflow, std::int64_t v) {
    if (overflow) throw EvalError("integer overflow");
    return v;
}

// Argument order is unspecified, so the builtin must run before `out` is read.
template <class F>
std::int64_t checkedOp(F op, std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    bool overflow = op(a, b, &out);
    return checked(overflow, out);
}

Value evaluate(const Expr& e, const Environment& env) {
    using Op = Expr::Op;
    switch (e.op) {
        case Op::Lit: return e.literal;
        case Op::Var: return env.get(e.name);
        case Op::Not: return !std::get<bool>(evaluate(*e.lhs, env));
        case Op::Neg: {
            auto v = std::get<std::int64_t>(evaluate(*e.lhs, env));
            return checked(v == std::numeric_limits<std::int64_t>::min(), -v);
        }
        case Op::Or: return std::get<bool>(evaluate(*e.lhs, env)) || std::get<bool>(evaluate(*e.rhs, env));
        case Op::And: return std::get<bool>(evaluate(*e.lhs, env)) && std::get<bool>(evaluate(*e.rhs, env));
        case Op::Eq: return evaluate(*e.lhs, env) == evaluate(*e.rhs, env);
        case Op::Ne: return evaluate(*e.lhs, env) != evaluate(*e.rhs, env);
        default: break;
    }
    auto l = evaluate(*e.lhs, env);
    auto r = evaluate(*e.rhs, env);
    if (e.op == Op::Add && e.type == ValueType::Text) return std::get<std::string>(l) + std::get<std::string>(r);
    auto a = std::get<std::int64_t>(l), b = std::get<std::int64_t>(r);
    switch (e.op) {
        case Op::Lt: return a < b;
        case Op::Le: return a <= b;
        case Op::Gt: return a > b;
        case Op::Ge: return a >= b;
        case Op::Add: return checkedOp([](auto x, auto y, auto* o) { return __builtin_add_overflow(x, y, o); }, a, b);
        case Op::Sub: return checkedOp([](auto x, auto y, auto* o) { return __builtin_sub_overflow(x, y, o); }, a, b);
        case Op::Mul: return checkedOp([](auto x, auto y, auto* o) { return __builtin_mul_overflow(x, y, o); }, a, b);
        case Op::Div:
            if (b == 0) throw EvalError("division by zero");
            return checked(a == std::numeric_limits<std::int64_t>::min() && b == -1, a / b);
        default: break;
    }
    throw EvalError("bad expression node");
}

void collect(const Expr& e, std::vector<std::string>& out) {
    if (e.op == Expr::Op::Var) out.push_back(e.name);
    if (e.lhs) collect(*e.lhs, out);
    if (e.rhs) collect(*e.rhs, out);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Expression Expression::compile(std::string_view text, const Scope& scope) {
    Lexer lex(text);
    ExprParser parser(lex, scope);
    auto root = parser.parse();
    if (lex.peek().kind != Tok::End) throw CompileError("trailing input '" + lex.peek().text + "'", lex.peek().offset);
    Expression e;
    e.source_ = std::string(trim(text));
    e.root_ = std::move(root);
    return e;
}

Value Expression::eval(const Environment& env) const { return evaluate(*root_, env); }

std::vector<std::string> Expression::references() const {
    std::vector<std::string> out;
    collect(*root_, out);
    return out;
}

Program Program::compile(std::string_view text, const Scope& readable, const Scope& assignable) {
    Lexer lex(text);
    auto statements = std::make_shared<std::vector<Assignment>>();
    bool braced = lex.accept("{");
    for (;;) {
        if (braced && lex.accept("}")) break;
        if (lex.peek().kind == Tok::End) {
            if (braced) throw CompileError("expected '}'", lex.peek().offset);
            break;
        }
        if (lex.accept(";")) continue;
        auto target = lex.next();
        if (target.kind != Tok::Ident) throw CompileError("expected assignment target", target.offset);
        auto it = assignable.find(target.text);
        if (it == assignable.end()) throw CompileError("cannot assign to '" + target.text + "'", target.offset);
        lex.expect("=");
        auto offset = lex.peek().offset;
        ExprParser parser(lex, readable);
        auto value = parser.parse();
        if (value->type != it->second)
            throw CompileError("type mismatch assigning to '" + target.text + "'", offset);
        statements->push_back({target.text, std::move(value)});
        if (!lex.accept(";")) {
            if (braced && lex.accept("}")) break;
            if (lex.peek().kind != Tok::End) throw CompileError("expected ';'", lex.peek().offset);
        }
    }
    if (lex.peek().kind != Tok::End) throw CompileError("trailing input", lex.peek().offset);
    Program p;
    p.source_ = std::string(trim(text));
    p.statements_ = std::move(statements);
    return p;
}

void Program::run(Environment& env) const {
    for (const auto& s : *statements_) env.set(s.target, evaluate(*s.value, env));
}

std::vector<VarDecl> parseParameterList(std::string_view text, std::size_t baseOffset) {
    std::vector<VarDecl> out;
    if (trim(text).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        auto comma = text.find(',', start);
        auto part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        Lexer lex(part);
        auto typeTok = lex.next();
        auto nameTok = lex.next();
        auto type = typeTok.kind == Tok::Ident ? typeFromName(typeTok.text) : std::nullopt;
        if (!type) throw CompileError("expected a type (bool, int, text)", baseOffset + start + typeTok.offset);
        if (nameTok.kind != Tok::Ident) throw CompileError("expected a name", baseOffset + start + nameTok.offset);
        if (lex.peek().kind != Tok::End) throw CompileError("unexpected input", baseOffset + start + lex.peek().offset);
        out.push_back({*type, nameTok.text});
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<VarDecl> parseDeclarations(std::string_view text) {
    std::vector<VarDecl> out;
    Lexer lex(text);
    while (lex.peek().kind != Tok::End) {
        if (lex.accept(";")) continue;
        auto typeTok = lex.next();
        auto type = typeTok.kind == Tok::Ident ? typeFromName(typeTok.text) : std::nullopt;
        if (!type) throw CompileError("expected a type (bool, int, text)", typeTok.offset);
        auto nameTok = lex.next();
        if (nameTok.kind != Tok::Ident) throw CompileError("expected a variable name", nameTok.offset);
        for (const auto& d : out)
            if (d.name == nameTok.text) throw CompileError("duplicate variable '" + nameTok.text + "'", nameTok.offset);
        out.push_back({*type, nameTok.text});
        if (lex.peek().kind != Tok::End) lex.expect(";");
    }
    return out;
}

Annotation parseAnnotation(std::string_view text) {
    auto group = [&](std::size_t from, std::size_t& after) {
        auto open = text.find('(', from);
        if (open == std::string_view::npos || !trim(text.substr(from, open - from)).empty())
            throw CompileError("expected '('", from);
        auto close = text.find(')', open);
        if (close == std::string_view::npos) throw CompileError("expected ')'", open);
        after = close + 1;
        return parseParameterList(text.substr(open + 1, close - open - 1), open + 1);
    };
    Annotation a;
    std::size_t pos = 0;
    a.exports = group(0, pos);
    auto colon = text.find(':', pos);
    if (colon == std::string_view::npos || !trim(text.substr(pos, colon - pos)).empty())
        throw CompileError("expected ':'", pos);
    a.imports = group(colon + 1, pos);
    auto arrow = text.find("->", pos);
    if (arrow == std::string_view::npos || !trim(text.substr(pos, arrow - pos)).empty())
        throw CompileError("expected '->'", pos);
    auto body = trim(text.substr(arrow + 2));
    if (body.size() < 2 || body.front() != '{' || body.back() != '}')
        throw CompileError("expected '{ statements }'", arrow + 2);
    a.body = std::string(body);
    return a;
}

}  // namespace chainflow::script
