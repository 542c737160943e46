#include "formula/formula.hpp"
#include "formula/refs.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace cellscope::formula {

namespace {

constexpr std::array kErrorLiterals = {"#NULL!", "#DIV/0!", "#VALUE!", "#REF!", "#NAME?",
                                       "#NUM!",  "#N/A",    "#GETTING_DATA", "#SPILL!", "#CALC!"};

bool is_word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '\\' || c == '$';
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '\\' || c == '$';
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
           });
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) break;
            out.push_back(next());
        }
        return out;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                      src_[pos_] == '\r')) {
            ++pos_;
        }
    }

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
        throw FormulaError("lexical", at, msg);
    }

    Token make(TokenKind kind, std::string lexeme, std::size_t start) const {
        return Token{kind, std::move(lexeme), Span{start, pos_}};
    }

    Token next() {
        const std::size_t start = pos_;
        const char c = peek();

        if (c == '"') return string_literal();
        if (c == '#') return error_literal(start);
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            return number_or_rows(start);
        }
        if (c == '\'') return quoted_sheet_reference(start);
        if (c == '[') return external_reference(start);
        if (is_word_start(c)) return word(start);

        switch (c) {
            case '<':
                ++pos_;
                if (peek() == '>' || peek() == '=') ++pos_;
                return make(TokenKind::Operator, std::string(src_.substr(start, pos_ - start)), start);
            case '>':
                ++pos_;
                if (peek() == '=') ++pos_;
                return make(TokenKind::Operator, std::string(src_.substr(start, pos_ - start)), start);
            case '+': case '-': case '*': case '/': case '^': case '&': case '=': case '%': case ':':
                ++pos_;
                return make(TokenKind::Operator, std::string(1, c), start);
            case '(': case ')': case ',': case ';': case '{': case '}':
                ++pos_;
                return make(TokenKind::Punctuation, std::string(1, c), start);
            default:
                fail(std::string("illegal character '") + c + "'", start);
        }
    }

    Token string_literal() {
        const std::size_t start = pos_++;
        std::string value;
        while (true) {
            if (pos_ >= src_.size()) fail("unterminated string literal", start);
            const char c = src_[pos_++];
            if (c == '"') {
                if (peek() == '"') {
                    value.push_back('"');
                    ++pos_;
                    continue;
                }
                break;
            }
            value.push_back(c);
        }
        return make(TokenKind::String, std::move(value), start);
    }

    Token error_literal(std::size_t start) {
        for (const char* lit : kErrorLiterals) {
            const std::string_view l(lit);
            if (iequals(src_.substr(pos_, l.size()), l)) {
                pos_ += l.size();
                return make(TokenKind::ErrorLiteral, std::string(l), start);
            }
        }
        fail("unknown error literal", start);
    }

    Token number_or_rows(std::size_t start) {
        // Whole-row range "3:5".
        std::size_t p = pos_;
        while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
        if (p < src_.size() && src_[p] == ':') {
            std::size_t q = p + 1;
            if (q < src_.size() && src_[q] == '$') ++q;
            std::size_t digits = q;
            while (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) ++q;
            if (q > digits && (q >= src_.size() || !is_word_char(src_[q]))) {
                pos_ = q;
                return make(TokenKind::CellRef, std::string(src_.substr(start, q - start)), start);
            }
        }

        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        if (peek() == '.') {
            ++pos_;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            std::size_t save = pos_;
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            if (!std::isdigit(static_cast<unsigned char>(peek()))) {
                pos_ = save;
            } else {
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            }
        }
        return make(TokenKind::Number, std::string(src_.substr(start, pos_ - start)), start);
    }

    std::size_t scan_word(std::size_t p) const {
        while (p < src_.size() && is_word_char(src_[p])) ++p;
        return p;
    }

    // After "sheet!" (or at a bare word): a cell, a column range or a row range.
    // Returns the end offset of the reference part, or npos when it is not one.
    std::size_t scan_reference_part(std::size_t p) const {
        const std::size_t end = scan_word(p);
        const std::string_view word = src_.substr(p, end - p);
        if (parse_cell_part(word)) return end;
        const bool col_like = is_column_part(word);
        const bool row_like = is_row_part(word);
        if ((col_like || row_like) && end < src_.size() && src_[end] == ':') {
            const std::size_t end2 = scan_word(end + 1);
            const std::string_view word2 = src_.substr(end + 1, end2 - end - 1);
            if ((col_like && is_column_part(word2)) || (row_like && is_row_part(word2))) return end2;
        }
        return std::string_view::npos;
    }

    Token prefixed_reference(std::size_t start, std::size_t bang) {
        // `bang` is the offset of '!'.
        pos_ = bang + 1;
        if (peek() == '#') {
            // Sheet1!#REF! collapses to the error literal.
            return error_literal(start);
        }
        const std::size_t end = scan_reference_part(pos_);
        if (end != std::string_view::npos) {
            pos_ = end;
            return make(TokenKind::CellRef, std::string(src_.substr(start, pos_ - start)), start);
        }
        const std::size_t wend = scan_word(pos_);
        if (wend == pos_) fail("expected reference after '!'", pos_);
        pos_ = wend;
        return make(TokenKind::Identifier, std::string(src_.substr(start, pos_ - start)), start);
    }

    Token quoted_sheet_reference(std::size_t start) {
        std::size_t p = pos_ + 1;
        while (true) {
            if (p >= src_.size()) fail("unterminated quoted sheet name", start);
            if (src_[p] == '\'') {
                if (p + 1 < src_.size() && src_[p + 1] == '\'') {
                    p += 2;
                    continue;
                }
                break;
            }
            ++p;
        }
        if (p + 1 >= src_.size() || src_[p + 1] != '!') fail("quoted sheet name must be followed by '!'", start);
        return prefixed_reference(start, p + 1);
    }

    Token external_reference(std::size_t start) {
        std::size_t p = src_.find(']', pos_);
        if (p == std::string_view::npos) fail("unterminated workbook reference", start);
        ++p;
        while (p < src_.size() && src_[p] != '!' && (is_word_char(src_[p]) || src_[p] == ' ')) ++p;
        if (p >= src_.size() || src_[p] != '!') {
            // Bare "[1]Name" style external name.
            pos_ = p;
            return make(TokenKind::Identifier, std::string(src_.substr(start, pos_ - start)), start);
        }
        return prefixed_reference(start, p);
    }

    Token word(std::size_t start) {
        const std::size_t end = scan_word(pos_);
        const std::string_view w = src_.substr(pos_, end - pos_);

        if (end < src_.size() && src_[end] == '!') {
            if (w.find('$') != std::string_view::npos) fail("'$' in sheet name", start);
            return prefixed_reference(start, end);
        }

        std::size_t look = end;
        while (look < src_.size() && src_[look] == ' ') ++look;
        const bool call = look < src_.size() && src_[look] == '(';

        const std::size_t ref_end = call ? std::string_view::npos : scan_reference_part(pos_);
        if (ref_end != std::string_view::npos) {
            pos_ = ref_end;
            return make(TokenKind::CellRef, std::string(src_.substr(start, pos_ - start)), start);
        }
        if (w.find('$') != std::string_view::npos) fail("malformed absolute reference", start);

        pos_ = end;

        if (!call && (iequals(w, "TRUE") || iequals(w, "FALSE"))) {
            return make(TokenKind::Boolean, std::string(w), start);
        }
        if (!call && peek() == '[') {
            // Structured table reference: consume balanced brackets.
            int depth = 0;
            do {
                if (pos_ >= src_.size()) fail("unterminated structured reference", start);
                if (src_[pos_] == '[') ++depth;
                if (src_[pos_] == ']') --depth;
                ++pos_;
            } while (depth > 0);
        }
        return make(TokenKind::Identifier, std::string(src_.substr(start, pos_ - start)), start);
    }
};

}  // namespace

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Number: return "number";
        case TokenKind::String: return "string";
        case TokenKind::Boolean: return "boolean";
        case TokenKind::ErrorLiteral: return "errorLiteral";
        case TokenKind::Identifier: return "identifier";
        case TokenKind::CellRef: return "cellRef";
        case TokenKind::Operator: return "operator";
        case TokenKind::Punctuation: return "punctuation";
    }
    return "?";
}

std::vector<Token> tokenize(std::string_view formula) {
    return Lexer(formula).run();
}

std::string shift_formula(std::string_view formula, int drow, int dcol) {
    const auto tokens = tokenize(formula);
    std::string out;
    std::size_t copied = 0;
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::CellRef) continue;
        auto ref = reference_from_lexeme(t.lexeme);
        if (ref.kind == RefKind::Unresolved && ref.category == "external-workbook") continue;
        const bool whole = ref.kind == RefKind::Unresolved;
        if (whole) {
            // whole rows / columns: shift the relative parts in the raw text
            continue;
        }
        auto shift = [&](RefCorner& c) {
            if (!c.row_abs && c.row > 0) c.row += drow;
            if (!c.col_abs && c.col > 0) c.col += dcol;
        };
        shift(ref.first);
        shift(ref.last);
        out.append(formula.substr(copied, t.span.start - copied));
        std::string prefix;
        if (auto bang = t.lexeme.rfind('!'); bang != std::string::npos) prefix = t.lexeme.substr(0, bang + 1);
        if (ref.first.row < 1 || ref.first.col < 1) {
            out += prefix + "#REF!";
        } else {
            Reference bare = ref;
            bare.sheet.clear();
            out += prefix + reference_text(bare);
        }
        copied = t.span.end;
    }
    out.append(formula.substr(copied));
    return out;
}

}  // namespace cellscope::formula
