#include "formula/formula.hpp"
#include "formula/refs.hpp"

#include <algorithm>
#include <cstdlib>

namespace cellscope::formula {

namespace {

// Replaces every node matching `pred` with its single child, bottom-up.
template <typename Pred>
void splice(RawNode& n, Pred pred) {
    for (auto& c : n.children) splice(c, pred);
    while (pred(n)) {
        if (n.children.size() != 1) break;
        RawNode child = std::move(n.children.front());
        n = std::move(child);
    }
}

bool is(const RawNode& n, RawKind k) { return n.kind == k; }

Reference range_from_corners(const RawNode& range) {
    const Reference a = reference_from_lexeme(range.children.at(0).text);
    const Reference b = reference_from_lexeme(range.children.at(1).text);
    if (a.kind != RefKind::Cell || b.kind != RefKind::Cell) {
        Reference u;
        u.kind = RefKind::Unresolved;
        u.text = range.children[0].text + ":" + range.children[1].text;
        u.category = a.kind == RefKind::Unresolved ? a.category : b.category;
        return u;
    }
    Reference r = a;
    r.kind = RefKind::Range;
    r.last = b.first;
    return r;
}

Reference truncate_one(const RawNode& inner) {
    switch (inner.kind) {
        case RawKind::CellRef: return reference_from_lexeme(inner.text);
        case RawKind::RangeExpr: return range_from_corners(inner);
        case RawKind::NamedRef: {
            Reference r;
            r.kind = RefKind::Named;
            const auto prefix = split_sheet(inner.text);
            r.name = std::string(prefix.rest);
            std::transform(r.name.begin(), r.name.end(), r.name.begin(),
                           [](unsigned char c) { return std::toupper(c); });
            return r;
        }
        case RawKind::Unresolved: return *inner.ref;
        default: break;
    }
    throw FormulaError("internal", 0, std::string("cannot truncate reference over ") + to_string(inner.kind));
}

AstNode lower(const RawNode& n) {
    AstNode a;
    switch (n.kind) {
        case RawKind::FunctionCall:
            a.kind = AstKind::Function;
            a.text = n.text;
            break;
        case RawKind::BinOp:
        case RawKind::UnOp:
            a.kind = AstKind::Operator;
            a.text = n.text;
            break;
        case RawKind::ArrayLiteral:
            a.kind = AstKind::ArrayConst;
            a.text = n.text;
            return a;
        case RawKind::Token:
            a.text = n.text;
            switch (n.literal) {
                case LiteralKind::Number:
                    a.kind = AstKind::NumberConst;
                    a.number = std::strtod(n.text.c_str(), nullptr);
                    break;
                case LiteralKind::Text: a.kind = AstKind::TextConst; break;
                case LiteralKind::Bool:
                    a.kind = AstKind::BoolConst;
                    a.boolean = n.text == "TRUE";
                    break;
                case LiteralKind::Error: a.kind = AstKind::ErrorConst; break;
                case LiteralKind::None:
                    throw FormulaError("internal", 0, "token without literal kind");
            }
            return a;
        case RawKind::Reference: {
            if (!n.ref) throw FormulaError("internal", 0, "reference not truncated");
            a.ref = *n.ref;
            switch (a.ref.kind) {
                case RefKind::Cell: a.kind = AstKind::CellReference; break;
                case RefKind::Range: a.kind = AstKind::RangeReference; break;
                case RefKind::Named: a.kind = AstKind::NamedReference; break;
                case RefKind::Unresolved: a.kind = AstKind::UnresolvedReference; break;
            }
            return a;
        }
        default:
            throw FormulaError("internal", 0, std::string("wrapper node survived normalization: ") + to_string(n.kind));
    }
    for (const auto& c : n.children) a.children.push_back(lower(c));
    return a;
}

RawNode lift_node(const AstNode& a) {
    RawNode n{RawKind::Token, a.text, {}, LiteralKind::None, std::nullopt};
    switch (a.kind) {
        case AstKind::Function: n.kind = RawKind::FunctionCall; break;
        case AstKind::Operator: n.kind = is_unary_symbol(a.text) || a.children.size() == 1 ? RawKind::UnOp : RawKind::BinOp; break;
        case AstKind::NumberConst: n.literal = LiteralKind::Number; break;
        case AstKind::TextConst: n.literal = LiteralKind::Text; break;
        case AstKind::BoolConst: n.literal = LiteralKind::Bool; break;
        case AstKind::ErrorConst: n.literal = LiteralKind::Error; break;
        case AstKind::ArrayConst: n.kind = RawKind::ArrayLiteral; break;
        case AstKind::CellReference:
        case AstKind::RangeReference:
        case AstKind::NamedReference:
        case AstKind::UnresolvedReference:
            n.kind = RawKind::Reference;
            n.text.clear();
            n.ref = a.ref;
            break;
    }
    for (const auto& c : a.children) n.children.push_back(lift_node(c));
    return n;
}

void order_corners(Reference& r) {
    if (r.kind != RefKind::Range) return;
    if (r.first.row > r.last.row) {
        std::swap(r.first.row, r.last.row);
        std::swap(r.first.row_abs, r.last.row_abs);
    }
    if (r.first.col > r.last.col) {
        std::swap(r.first.col, r.last.col);
        std::swap(r.first.col_abs, r.last.col_abs);
    }
}

void collect_refs(const AstNode& a, std::vector<Reference>& out) {
    for (const auto& c : a.children) collect_refs(c, out);
    if (a.is_reference()) {
        out.push_back(a.ref);
        order_corners(out.back());
    }
}

}  // namespace

void remove_reference_nodes_before_function_calls(RawNode& root) {
    splice(root, [](const RawNode& n) {
        return is(n, RawKind::Reference) && n.children.size() == 1 && is(n.children[0], RawKind::FunctionCall);
    });
}

void remove_formula_eq_node(RawNode& root) {
    if (is(root, RawKind::FormulaEq) && root.children.size() == 1) {
        RawNode child = std::move(root.children.front());
        root = std::move(child);
    }
}

void inline_function_names(RawNode& root) {
    for (auto& c : root.children) inline_function_names(c);
    if (is(root, RawKind::FunctionCall) && !root.children.empty() && is(root.children.front(), RawKind::FunctionName)) {
        root.text = root.children.front().text;
        root.children.erase(root.children.begin());
    }
}

void remove_constant_nodes(RawNode& root) {
    splice(root, [](const RawNode& n) { return is(n, RawKind::Constant); });
}

void remove_formula_nodes(RawNode& root) {
    // Parentheses carry no structure once the tree exists; they go with the
    // Formula wrappers.
    splice(root, [](const RawNode& n) { return is(n, RawKind::Formula) || is(n, RawKind::Paren); });
}

void remove_number_nodes(RawNode& root) {
    splice(root, [](const RawNode& n) {
        return is(n, RawKind::Number) || is(n, RawKind::Text) || is(n, RawKind::Bool) || is(n, RawKind::Error);
    });
}

void remove_argument_nodes(RawNode& root) {
    splice(root, [](const RawNode& n) { return is(n, RawKind::Argument); });
}

void truncate_references(RawNode& root) {
    for (auto& c : root.children) truncate_references(c);
    if (is(root, RawKind::Reference) && root.children.size() == 1) {
        Reference r = truncate_one(root.children.front());
        root.children.clear();
        root.text.clear();
        root.ref = std::move(r);
    }
}

AstNode normalize(const ParseTree& tree) {
    RawNode n = tree.root;
    remove_reference_nodes_before_function_calls(n);
    remove_formula_eq_node(n);
    inline_function_names(n);
    remove_constant_nodes(n);
    remove_formula_nodes(n);
    remove_number_nodes(n);
    remove_argument_nodes(n);
    truncate_references(n);
    return lower(n);
}

ParseTree lift(const AstNode& ast) { return ParseTree{lift_node(ast)}; }

AstNode parse_ast(std::string_view formula) { return normalize(parse(formula)); }

bool is_unary_symbol(std::string_view symbol) { return symbol == "u-" || symbol == "u+" || symbol == "%"; }

bool AstNode::operator==(const AstNode& o) const {
    if (kind != o.kind || children.size() != o.children.size()) return false;
    switch (kind) {
        case AstKind::NumberConst:
            if (number != o.number) return false;
            break;
        case AstKind::BoolConst:
            if (boolean != o.boolean) return false;
            break;
        case AstKind::CellReference:
        case AstKind::RangeReference:
        case AstKind::NamedReference:
        case AstKind::UnresolvedReference:
            if (!(ref == o.ref)) return false;
            break;
        default:
            if (text != o.text) return false;
    }
    return std::equal(children.begin(), children.end(), o.children.begin());
}

std::size_t node_count(const AstNode& n) {
    std::size_t c = 1;
    for (const auto& k : n.children) c += node_count(k);
    return c;
}

const char* to_string(AstKind kind) {
    switch (kind) {
        case AstKind::Function: return "Function";
        case AstKind::Operator: return "Operator";
        case AstKind::NumberConst: return "NumberConst";
        case AstKind::TextConst: return "TextConst";
        case AstKind::BoolConst: return "BoolConst";
        case AstKind::ErrorConst: return "ErrorConst";
        case AstKind::CellReference: return "CellReference";
        case AstKind::RangeReference: return "RangeReference";
        case AstKind::NamedReference: return "NamedReference";
        case AstKind::ArrayConst: return "ArrayConst";
        case AstKind::UnresolvedReference: return "UnresolvedReference";
    }
    return "?";
}

std::vector<Reference> references_of(const AstNode& ast) {
    std::vector<Reference> out;
    collect_refs(ast, out);
    return out;
}

std::vector<std::string> unresolved_categories(const AstNode& ast) {
    std::vector<std::string> out;
    for (const auto& r : references_of(ast))
        if (r.kind == RefKind::Unresolved) out.push_back(r.category);
    return out;
}

}  // namespace cellscope::formula
