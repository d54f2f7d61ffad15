#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chainflow::script {

enum class ValueType : std::uint8_t { Bool, Int, Text };

using Value = std::variant<bool, std::int64_t, std::string>;

std::string_view typeName(ValueType t);
std::optional<ValueType> typeFromName(std::string_view name);
ValueType typeOf(const Value& v);
Value defaultValue(ValueType t);
std::string render(const Value& v);

struct VarDecl {
    ValueType type = ValueType::Bool;
    std::string name;
    friend bool operator==(const VarDecl&, const VarDecl&) = default;
};

/// Syntax or type error found while compiling DSL text. `offset` is the byte
/// position in the compiled text.
class CompileError : public std::runtime_error {
public:
    CompileError(std::string message, std::size_t offset)
        : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Raised while evaluating (overflow, division by zero).
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Expr {
    enum class Op : std::uint8_t { Lit, Var, Not, Neg, Or, And, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul, Div };
    Op op = Op::Lit;
    ValueType type = ValueType::Bool;
    Value literal;
    std::string name;
    std::unique_ptr<Expr> lhs;
    std::unique_ptr<Expr> rhs;
};

struct Assignment {
    std::string target;
    std::unique_ptr<Expr> value;
};

using Scope = std::map<std::string, ValueType, std::less<>>;

/// Variable lookup used during evaluation.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const Value& get(std::string_view name) const = 0;
    virtual void set(std::string_view name, Value v) = 0;
};

/// Compiled expression with its source text kept for serialization.
class Expression {
public:
    static Expression compile(std::string_view text, const Scope& scope);
    const std::string& source() const { return source_; }
    ValueType type() const { return root_->type; }
    Value eval(const Environment& env) const;
    /// Variables referenced anywhere in the expression.
    std::vector<std::string> references() const;

private:
    std::string source_;
    std::shared_ptr<const Expr> root_;
};

/// A list of `name = expr;` statements. Targets must be in `assignable`.
class Program {
public:
    static Program compile(std::string_view text, const Scope& readable, const Scope& assignable);
    const std::string& source() const { return source_; }
    bool empty() const { return statements_->empty(); }
    std::size_t size() const { return statements_->size(); }
    void run(Environment& env) const;

private:
    std::string source_;
    std::shared_ptr<const std::vector<Assignment>> statements_;
};

/// `(exports) : (imports) -> { statements }`.
struct Annotation {
    std::vector<VarDecl> exports;
    std::vector<VarDecl> imports;
    std::string body;
};

/// Splits an annotation into its parts; the body is compiled separately.
Annotation parseAnnotation(std::string_view text);
/// Parses `type name;` declarations, whitespace-insensitive.
std::vector<VarDecl> parseDeclarations(std::string_view text);
/// Comma-separated `type name` list (no parentheses).
std::vector<VarDecl> parseParameterList(std::string_view text, std::size_t baseOffset = 0);

}  // namespace chainflow::script
