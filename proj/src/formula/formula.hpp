#pragma once

// Spreadsheet formula front end: tokenizer, raw parse tree, the normalization
// passes that turn it into an operator AST, and printers.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cellscope::formula {

// ---------------------------------------------------------------- tokens

enum class TokenKind { Number, String, Boolean, ErrorLiteral, Identifier, CellRef, Operator, Punctuation };

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
    bool operator==(const Span&) const = default;
};

struct Token {
    TokenKind kind;
    std::string lexeme;  // string tokens hold the unescaped value
    Span span;
    bool operator==(const Token&) const = default;
};

const char* to_string(TokenKind kind);

// Lexical and syntax errors. `category` feeds parse-rate reports.
class FormulaError : public std::runtime_error {
public:
    FormulaError(std::string category, std::size_t offset, const std::string& message)
        : std::runtime_error(message + " at offset " + std::to_string(offset)),
          category_(std::move(category)),
          offset_(offset) {}
    const std::string& category() const { return category_; }
    std::size_t offset() const { return offset_; }

private:
    std::string category_;
    std::size_t offset_;
};

std::vector<Token> tokenize(std::string_view formula);

// ---------------------------------------------------------------- references

struct RefCorner {
    int row = 0;  // 0 for whole-column references
    int col = 0;  // 0 for whole-row references
    bool row_abs = false;
    bool col_abs = false;
    bool operator==(const RefCorner&) const = default;
};

enum class RefKind { Cell, Range, Named, Unresolved };

struct Reference {
    RefKind kind = RefKind::Cell;
    std::string sheet;  // empty: the host cell's sheet
    RefCorner first;
    RefCorner last;     // == first for single cells
    std::string name;   // named references
    std::string text;   // unresolved references: source text
    std::string category;  // unresolved references: why ("external-workbook", ...)

    bool operator==(const Reference&) const = default;
};

// Parses "Sheet1!$B$3:$B$5", "B3", "'My Sheet'!A1". Returns nullopt if the
// text is not a single cell or rectangular range.
std::optional<Reference> parse_region(std::string_view text);
std::string reference_text(const Reference& r);

// Shifts the relative corners of every cell reference in `formula` by the
// given offset; used to expand xlsx shared formulas.
std::string shift_formula(std::string_view formula, int drow, int dcol);

// ---------------------------------------------------------------- raw tree

enum class RawKind {
    FormulaEq,
    Formula,
    FunctionCall,
    FunctionName,
    Argument,
    Constant,
    Number,
    Text,
    Bool,
    Error,
    Reference,
    CellRef,
    RangeExpr,
    NamedRef,
    Unresolved,
    BinOp,
    UnOp,
    Paren,
    ArrayLiteral,
    Token,
};

const char* to_string(RawKind kind);

enum class LiteralKind { None, Number, Text, Bool, Error };

struct RawNode {
    RawKind kind;
    std::string text;
    std::vector<RawNode> children;
    LiteralKind literal = LiteralKind::None;  // Token leaves
    std::optional<Reference> ref;             // set by reference truncation

    bool operator==(const RawNode&) const = default;
};

struct ParseTree {
    RawNode root;
    bool operator==(const ParseTree&) const = default;
};

ParseTree parse(std::string_view formula);

std::size_t node_count(const RawNode& n);

// ---------------------------------------------------------------- AST

enum class AstKind {
    Function,
    Operator,
    NumberConst,
    TextConst,
    BoolConst,
    ErrorConst,
    CellReference,
    RangeReference,
    NamedReference,
    ArrayConst,
    UnresolvedReference,
};

const char* to_string(AstKind kind);

struct AstNode {
    AstKind kind = AstKind::NumberConst;
    // Function name (upper case), operator symbol, text value, error code,
    // number lexeme, or array literal text.
    std::string text;
    double number = 0;
    bool boolean = false;
    Reference ref;
    std::vector<AstNode> children;

    bool is_reference() const {
        return kind == AstKind::CellReference || kind == AstKind::RangeReference ||
               kind == AstKind::NamedReference || kind == AstKind::UnresolvedReference;
    }
    bool is_constant() const {
        return kind == AstKind::NumberConst || kind == AstKind::TextConst || kind == AstKind::BoolConst ||
               kind == AstKind::ErrorConst || kind == AstKind::ArrayConst;
    }

    bool operator==(const AstNode& o) const;
};

std::size_t node_count(const AstNode& n);

// Unary operators use the symbols "u-" / "u+"; "%" is postfix.
bool is_unary_symbol(std::string_view symbol);

// The individual passes, exposed for tests. Each rewrites the tree in place.
void remove_reference_nodes_before_function_calls(RawNode& root);
void remove_formula_eq_node(RawNode& root);
void inline_function_names(RawNode& root);
void remove_constant_nodes(RawNode& root);
void remove_formula_nodes(RawNode& root);
void remove_number_nodes(RawNode& root);
void remove_argument_nodes(RawNode& root);
void truncate_references(RawNode& root);

AstNode normalize(const ParseTree& tree);
// Lifts an AST back into raw-node form (no wrapper nodes); normalizing the
// result is the identity.
ParseTree lift(const AstNode& ast);

// Parse + normalize.
AstNode parse_ast(std::string_view formula);

// Reference leaves in post order with range corners ordered.
std::vector<Reference> references_of(const AstNode& ast);

// Unresolved-reference categories found in the tree (post order).
std::vector<std::string> unresolved_categories(const AstNode& ast);

// ---------------------------------------------------------------- printers

// "(IF (> C4 (AVERAGE C$2:C$4)) 100 0)"
std::string to_sexpr(const AstNode& ast);
// Formula text without the leading "=", minimal parentheses.
std::string to_formula(const AstNode& ast);
// Formula text from the raw tree, parentheses as written.
std::string to_formula(const ParseTree& tree);
// Indented dump of the raw tree, one node per line.
std::string dump(const ParseTree& tree);

}  // namespace cellscope::formula
