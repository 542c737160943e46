#include "formula/formula.hpp"
#include "formula/refs.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace cellscope::formula {

namespace {

// Functions whose result may itself be a reference; the raw tree wraps their
// calls in a Reference node the way reference-aware grammars do.
constexpr std::array kReferenceFunctions = {"IF", "CHOOSE", "INDEX", "OFFSET", "INDIRECT"};

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

RawNode node(RawKind kind, std::string text = {}, std::vector<RawNode> children = {}) {
    RawNode n{kind, std::move(text), std::move(children), LiteralKind::None, std::nullopt};
    return n;
}

RawNode wrap(RawKind kind, RawNode child) {
    std::vector<RawNode> c;
    c.push_back(std::move(child));
    return node(kind, {}, std::move(c));
}

RawNode formula_of(RawNode inner) { return wrap(RawKind::Formula, std::move(inner)); }

RawNode literal(RawKind type, LiteralKind lit, std::string text) {
    RawNode tok = node(RawKind::Token, std::move(text));
    tok.literal = lit;
    return formula_of(wrap(RawKind::Constant, wrap(type, std::move(tok))));
}

bool looks_r1c1(std::string_view w) {
    if (w.empty() || (w[0] != 'R' && w[0] != 'r')) return false;
    std::size_t i = 1;
    while (i < w.size() && std::isdigit(static_cast<unsigned char>(w[i]))) ++i;
    if (i >= w.size() || (w[i] != 'C' && w[i] != 'c')) return false;
    ++i;
    while (i < w.size() && std::isdigit(static_cast<unsigned char>(w[i]))) ++i;
    return i == w.size();
}

RawNode unresolved(std::string text, std::string category) {
    Reference r;
    r.kind = RefKind::Unresolved;
    r.text = text;
    r.category = std::move(category);
    RawNode u = node(RawKind::Unresolved, std::move(text));
    u.ref = std::move(r);
    return u;
}

class Parser {
public:
    Parser(std::string_view src, std::vector<Token> tokens) : src_(src), toks_(std::move(tokens)) {}

    ParseTree run() {
        if (toks_.empty()) throw FormulaError("syntax", 0, "empty formula");
        RawNode body = comparison();
        if (pos_ < toks_.size()) fail("unexpected token '" + toks_[pos_].lexeme + "'");
        return ParseTree{wrap(RawKind::FormulaEq, std::move(body))};
    }

private:
    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token* peek() const { return pos_ < toks_.size() ? &toks_[pos_] : nullptr; }

    bool at_op(std::string_view op) const {
        const Token* t = peek();
        return t && t->kind == TokenKind::Operator && t->lexeme == op;
    }
    bool at_punct(char p) const {
        const Token* t = peek();
        return t && t->kind == TokenKind::Punctuation && t->lexeme[0] == p;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        const std::size_t at = pos_ < toks_.size() ? toks_[pos_].span.start : src_.size();
        throw FormulaError("syntax", at, msg);
    }

    void expect_punct(char p) {
        if (!at_punct(p)) fail(std::string("expected '") + p + "'");
        ++pos_;
    }

    template <typename Next>
    RawNode binary_level(std::initializer_list<std::string_view> ops, Next next) {
        RawNode left = (this->*next)();
        while (const Token* t = peek()) {
            if (t->kind != TokenKind::Operator) break;
            if (std::find(ops.begin(), ops.end(), t->lexeme) == ops.end()) break;
            std::string op = t->lexeme;
            ++pos_;
            RawNode right = (this->*next)();
            std::vector<RawNode> kids;
            kids.push_back(std::move(left));
            kids.push_back(std::move(right));
            left = formula_of(node(RawKind::BinOp, std::move(op), std::move(kids)));
        }
        return left;
    }

    RawNode comparison() { return binary_level({"=", "<>", "<", ">", "<=", ">="}, &Parser::concat); }
    RawNode concat() { return binary_level({"&"}, &Parser::additive); }
    RawNode additive() { return binary_level({"+", "-"}, &Parser::multiplicative); }
    RawNode multiplicative() { return binary_level({"*", "/"}, &Parser::power); }
    RawNode power() { return binary_level({"^"}, &Parser::unary); }

    RawNode unary() {
        if (at_op("-") || at_op("+")) {
            RawNode u = node(RawKind::UnOp, "u" + peek()->lexeme);
            ++pos_;
            u.children.push_back(unary());
            return formula_of(std::move(u));
        }
        return postfix();
    }

    RawNode postfix() {
        RawNode operand = range();
        while (at_op("%")) {
            ++pos_;
            RawNode u = node(RawKind::UnOp, "%");
            u.children.push_back(std::move(operand));
            operand = formula_of(std::move(u));
        }
        return operand;
    }

    RawNode range() {
        const Token* t = peek();
        if (t && t->kind == TokenKind::CellRef && at_range_after_cell()) {
            const Token& a = toks_[pos_];
            const Token& b = toks_[pos_ + 2];
            if (b.lexeme.find('!') != std::string::npos) fail("sheet prefix on second range corner");
            pos_ += 3;
            if (a.lexeme.find(':') != std::string::npos || b.lexeme.find(':') != std::string::npos)
                fail("unsupported range operand");
            std::vector<RawNode> corners;
            corners.push_back(node(RawKind::CellRef, a.lexeme));
            corners.push_back(node(RawKind::CellRef, b.lexeme));
            RawNode r = formula_of(wrap(RawKind::Reference, node(RawKind::RangeExpr, {}, std::move(corners))));
            if (at_op(":")) fail("chained range operator is not supported");
            return r;
        }
        RawNode p = primary();
        if (at_op(":")) fail("range operator requires cell references");
        return p;
    }

    bool at_range_after_cell() const {
        return pos_ + 2 < toks_.size() && toks_[pos_ + 1].kind == TokenKind::Operator &&
               toks_[pos_ + 1].lexeme == ":" && toks_[pos_ + 2].kind == TokenKind::CellRef;
    }

    RawNode primary() {
        const Token* t = peek();
        if (!t) fail("unexpected end of formula");
        switch (t->kind) {
            case TokenKind::Number: {
                ++pos_;
                return literal(RawKind::Number, LiteralKind::Number, t->lexeme);
            }
            case TokenKind::String: {
                ++pos_;
                return literal(RawKind::Text, LiteralKind::Text, t->lexeme);
            }
            case TokenKind::Boolean: {
                ++pos_;
                return literal(RawKind::Bool, LiteralKind::Bool, upper(t->lexeme));
            }
            case TokenKind::ErrorLiteral: {
                ++pos_;
                return literal(RawKind::Error, LiteralKind::Error, upper(t->lexeme));
            }
            case TokenKind::CellRef: {
                ++pos_;
                Reference r = reference_from_lexeme(t->lexeme);
                if (r.kind == RefKind::Unresolved) {
                    return formula_of(wrap(RawKind::Reference, unresolved(r.text, r.category)));
                }
                return formula_of(wrap(RawKind::Reference, node(RawKind::CellRef, t->lexeme)));
            }
            case TokenKind::Identifier: return identifier();
            case TokenKind::Punctuation:
                if (t->lexeme == "(") {
                    ++pos_;
                    RawNode inner = comparison();
                    expect_punct(')');
                    return formula_of(wrap(RawKind::Paren, std::move(inner)));
                }
                if (t->lexeme == "{") return array_literal();
                break;
            case TokenKind::Operator: break;
        }
        fail("unexpected token '" + t->lexeme + "'");
    }

    RawNode identifier() {
        const Token& t = toks_[pos_++];
        const std::string& w = t.lexeme;
        if (at_punct('(')) {
            if (w.find('!') != std::string::npos || w.find('[') != std::string::npos)
                fail("qualified function names are not supported");
            ++pos_;
            std::string name = upper(w);
            std::vector<RawNode> kids;
            kids.push_back(node(RawKind::FunctionName, name));
            if (!at_punct(')')) {
                while (true) {
                    if (at_punct(',') || at_punct(')')) fail("missing function argument");
                    kids.push_back(wrap(RawKind::Argument, comparison()));
                    if (at_punct(',')) {
                        ++pos_;
                        continue;
                    }
                    break;
                }
            }
            expect_punct(')');
            RawNode call = node(RawKind::FunctionCall, {}, std::move(kids));
            const bool ref_fn = std::find(kReferenceFunctions.begin(), kReferenceFunctions.end(), name) !=
                                kReferenceFunctions.end();
            return formula_of(ref_fn ? wrap(RawKind::Reference, std::move(call)) : std::move(call));
        }
        if (w.find('[') != std::string::npos) {
            const bool external = !w.empty() && w.front() == '[';
            return formula_of(
                wrap(RawKind::Reference, unresolved(w, external ? "external-workbook" : "structured-reference")));
        }
        if (looks_r1c1(w)) return formula_of(wrap(RawKind::Reference, unresolved(w, "r1c1")));
        return formula_of(wrap(RawKind::Reference, node(RawKind::NamedRef, w)));
    }

    RawNode array_literal() {
        ++pos_;  // {
        std::string text = "{";
        bool expect_item = true;
        while (true) {
            const Token* t = peek();
            if (!t) fail("unterminated array literal");
            if (t->kind == TokenKind::Punctuation && t->lexeme == "}") {
                if (expect_item) fail("empty array element");
                ++pos_;
                break;
            }
            if (!expect_item) {
                if (t->kind == TokenKind::Punctuation && (t->lexeme == "," || t->lexeme == ";")) {
                    text += t->lexeme;
                    ++pos_;
                    expect_item = true;
                    continue;
                }
                fail("expected ',' or ';' in array literal");
            }
            if (t->kind == TokenKind::Operator && t->lexeme == "-") {
                text += '-';
                ++pos_;
                t = peek();
                if (!t || t->kind != TokenKind::Number) fail("expected number after '-'");
            }
            switch (t->kind) {
                case TokenKind::Number: text += t->lexeme; break;
                case TokenKind::Boolean:
                case TokenKind::ErrorLiteral: text += upper(t->lexeme); break;
                case TokenKind::String: {
                    text += '"';
                    for (char c : t->lexeme) {
                        text += c;
                        if (c == '"') text += '"';
                    }
                    text += '"';
                    break;
                }
                default: fail("unsupported array element");
            }
            ++pos_;
            expect_item = false;
        }
        text += "}";
        return formula_of(wrap(RawKind::Constant, node(RawKind::ArrayLiteral, std::move(text))));
    }
};

}  // namespace

const char* to_string(RawKind kind) {
    switch (kind) {
        case RawKind::FormulaEq: return "FormulaEq";
        case RawKind::Formula: return "Formula";
        case RawKind::FunctionCall: return "FunctionCall";
        case RawKind::FunctionName: return "FunctionName";
        case RawKind::Argument: return "Argument";
        case RawKind::Constant: return "Constant";
        case RawKind::Number: return "Number";
        case RawKind::Text: return "Text";
        case RawKind::Bool: return "Bool";
        case RawKind::Error: return "Error";
        case RawKind::Reference: return "Reference";
        case RawKind::CellRef: return "CellRef";
        case RawKind::RangeExpr: return "RangeExpr";
        case RawKind::NamedRef: return "NamedRef";
        case RawKind::Unresolved: return "Unresolved";
        case RawKind::BinOp: return "BinOp";
        case RawKind::UnOp: return "UnOp";
        case RawKind::Paren: return "Paren";
        case RawKind::ArrayLiteral: return "ArrayLiteral";
        case RawKind::Token: return "Token";
    }
    return "?";
}

ParseTree parse(std::string_view formula) {
    return Parser(formula, tokenize(formula)).run();
}

std::size_t node_count(const RawNode& n) {
    std::size_t c = 1;
    for (const auto& k : n.children) c += node_count(k);
    return c;
}

}  // namespace cellscope::formula
