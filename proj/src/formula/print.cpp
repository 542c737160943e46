#include "formula/formula.hpp"

#include <sstream>

namespace cellscope::formula {

namespace {

std::string quote(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        q += c;
        if (c == '"') q += '"';
    }
    return q + "\"";
}

int precedence(const AstNode& a) {
    if (a.kind != AstKind::Operator) return 8;
    const std::string& s = a.text;
    if (s == "%") return 7;
    if (s == "u-" || s == "u+") return 6;
    if (s == "^") return 5;
    if (s == "*" || s == "/") return 4;
    if (s == "+" || s == "-") return 3;
    if (s == "&") return 2;
    return 1;
}

std::string leaf_text(const AstNode& a) {
    switch (a.kind) {
        case AstKind::TextConst: return quote(a.text);
        case AstKind::BoolConst: return a.boolean ? "TRUE" : "FALSE";
        case AstKind::NumberConst:
        case AstKind::ErrorConst:
        case AstKind::ArrayConst: return a.text;
        case AstKind::CellReference:
        case AstKind::RangeReference:
        case AstKind::NamedReference:
        case AstKind::UnresolvedReference: return reference_text(a.ref);
        default: return a.text;
    }
}

void infix(const AstNode& a, std::string& out) {
    auto child = [&](const AstNode& c, bool paren) {
        if (paren) out += '(';
        infix(c, out);
        if (paren) out += ')';
    };
    switch (a.kind) {
        case AstKind::Function:
            out += a.text;
            out += '(';
            for (std::size_t i = 0; i < a.children.size(); ++i) {
                if (i) out += ',';
                infix(a.children[i], out);
            }
            out += ')';
            return;
        case AstKind::Operator: {
            const int p = precedence(a);
            if (a.text == "%") {
                child(a.children.at(0), precedence(a.children[0]) < 8);
                out += '%';
            } else if (a.text == "u-" || a.text == "u+") {
                out += a.text[1];
                child(a.children.at(0), precedence(a.children[0]) < 6);
            } else {
                child(a.children.at(0), precedence(a.children[0]) < p);
                out += a.text;
                child(a.children.at(1), precedence(a.children[1]) <= p);
            }
            return;
        }
        default: out += leaf_text(a);
    }
}

void sexpr(const AstNode& a, std::string& out) {
    if (a.kind != AstKind::Function && a.kind != AstKind::Operator) {
        out += leaf_text(a);
        return;
    }
    out += '(';
    out += a.text;
    for (const auto& c : a.children) {
        out += ' ';
        sexpr(c, out);
    }
    out += ')';
}

void raw_text(const RawNode& n, std::string& out) {
    switch (n.kind) {
        case RawKind::Paren:
            out += '(';
            raw_text(n.children.at(0), out);
            out += ')';
            return;
        case RawKind::BinOp:
            raw_text(n.children.at(0), out);
            out += n.text;
            raw_text(n.children.at(1), out);
            return;
        case RawKind::UnOp:
            if (n.text == "%") {
                raw_text(n.children.at(0), out);
                out += '%';
            } else {
                out += n.text.substr(1);
                raw_text(n.children.at(0), out);
            }
            return;
        case RawKind::FunctionCall: {
            std::size_t i = 0;
            if (!n.children.empty() && n.children[0].kind == RawKind::FunctionName) {
                out += n.children[0].text;
                i = 1;
            } else {
                out += n.text;
            }
            out += '(';
            for (std::size_t k = i; k < n.children.size(); ++k) {
                if (k > i) out += ',';
                raw_text(n.children[k], out);
            }
            out += ')';
            return;
        }
        case RawKind::RangeExpr:
            out += n.children.at(0).text + ":" + n.children.at(1).text;
            return;
        case RawKind::CellRef:
        case RawKind::NamedRef:
        case RawKind::Unresolved:
        case RawKind::ArrayLiteral:
        case RawKind::FunctionName: out += n.text; return;
        case RawKind::Token: out += n.literal == LiteralKind::Text ? quote(n.text) : n.text; return;
        case RawKind::Reference:
            if (n.ref) {
                out += reference_text(*n.ref);
                return;
            }
            break;
        default: break;
    }
    for (const auto& c : n.children) raw_text(c, out);
}

void dump_node(const RawNode& n, int depth, std::ostringstream& os) {
    os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << to_string(n.kind);
    if (!n.text.empty()) os << ' ' << n.text;
    os << '\n';
    for (const auto& c : n.children) dump_node(c, depth + 1, os);
}

}  // namespace

std::string to_sexpr(const AstNode& ast) {
    std::string out;
    sexpr(ast, out);
    return out;
}

std::string to_formula(const AstNode& ast) {
    std::string out;
    infix(ast, out);
    return out;
}

std::string to_formula(const ParseTree& tree) {
    std::string out;
    raw_text(tree.root, out);
    return out;
}

std::string dump(const ParseTree& tree) {
    std::ostringstream os;
    dump_node(tree.root, 0, os);
    return os.str();
}

}  // namespace cellscope::formula
