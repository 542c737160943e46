#include "formula/refs.hpp"

#include "workbook.hpp"

#include <algorithm>
#include <cctype>

namespace cellscope::formula {

std::optional<RefCorner> parse_cell_part(std::string_view t) {
    RefCorner c;
    std::size_t i = 0;
    if (i < t.size() && t[i] == '$') {
        c.col_abs = true;
        ++i;
    }
    const std::size_t letters = i;
    while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
    if (i == letters || i - letters > 3) return std::nullopt;
    c.col = column_index(t.substr(letters, i - letters));
    if (i < t.size() && t[i] == '$') {
        c.row_abs = true;
        ++i;
    }
    const std::size_t digits = i;
    long row = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
        row = row * 10 + (t[i] - '0');
        if (row > kMaxRows) return std::nullopt;
        ++i;
    }
    if (i == digits || i != t.size()) return std::nullopt;
    if (t[digits] == '0' || row < 1 || c.col < 1 || c.col > kMaxCols) return std::nullopt;
    c.row = static_cast<int>(row);
    return c;
}

bool is_column_part(std::string_view t) {
    if (!t.empty() && t.front() == '$') t.remove_prefix(1);
    if (t.empty() || t.size() > 3) return false;
    if (!std::all_of(t.begin(), t.end(), [](char ch) { return std::isalpha(static_cast<unsigned char>(ch)); }))
        return false;
    const int c = column_index(t);
    return c >= 1 && c <= kMaxCols;
}

bool is_row_part(std::string_view t) {
    if (!t.empty() && t.front() == '$') t.remove_prefix(1);
    if (t.empty() || t.size() > 7) return false;
    return std::all_of(t.begin(), t.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
}

SheetPrefix split_sheet(std::string_view lexeme) {
    SheetPrefix out;
    const auto bang = lexeme.rfind('!');
    if (bang == std::string_view::npos) {
        out.rest = lexeme;
        return out;
    }
    std::string_view sheet = lexeme.substr(0, bang);
    out.rest = lexeme.substr(bang + 1);
    if (sheet.size() >= 2 && sheet.front() == '\'' && sheet.back() == '\'') {
        sheet = sheet.substr(1, sheet.size() - 2);
        for (std::size_t i = 0; i < sheet.size(); ++i) {
            out.sheet.push_back(sheet[i]);
            if (sheet[i] == '\'' && i + 1 < sheet.size() && sheet[i + 1] == '\'') ++i;
        }
    } else {
        out.sheet = std::string(sheet);
    }
    out.external = out.sheet.find('[') != std::string::npos;
    return out;
}

Reference reference_from_lexeme(std::string_view lexeme) {
    const auto prefix = split_sheet(lexeme);
    Reference r;
    if (prefix.external) {
        r.kind = RefKind::Unresolved;
        r.text = std::string(lexeme);
        r.category = "external-workbook";
        return r;
    }
    r.sheet = prefix.sheet;
    const std::string_view rest = prefix.rest;
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
        if (auto c = parse_cell_part(rest)) {
            r.kind = RefKind::Cell;
            r.first = r.last = *c;
            return r;
        }
    } else {
        auto a = parse_cell_part(rest.substr(0, colon));
        auto b = parse_cell_part(rest.substr(colon + 1));
        if (a && b) {
            r.kind = RefKind::Range;
            r.first = *a;
            r.last = *b;
            return r;
        }
    }
    r.kind = RefKind::Unresolved;
    r.text = std::string(lexeme);
    r.category = "whole-row-column";
    return r;
}

bool sheet_needs_quotes(std::string_view sheet) {
    if (sheet.empty()) return true;
    if (std::isdigit(static_cast<unsigned char>(sheet.front()))) return true;
    if (parse_cell_part(sheet)) return true;
    return !std::all_of(sheet.begin(), sheet.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
    });
}

namespace {

std::string corner_text(const RefCorner& c) {
    std::string s;
    if (c.col_abs) s += '$';
    s += column_letters(c.col);
    if (c.row_abs) s += '$';
    s += std::to_string(c.row);
    return s;
}

std::string sheet_prefix(const std::string& sheet) {
    if (sheet.empty()) return {};
    if (!sheet_needs_quotes(sheet)) return sheet + "!";
    std::string q = "'";
    for (char ch : sheet) {
        q += ch;
        if (ch == '\'') q += '\'';
    }
    return q + "'!";
}

}  // namespace

std::string reference_text(const Reference& r) {
    switch (r.kind) {
        case RefKind::Cell: return sheet_prefix(r.sheet) + corner_text(r.first);
        case RefKind::Range: return sheet_prefix(r.sheet) + corner_text(r.first) + ":" + corner_text(r.last);
        case RefKind::Named: return r.name;
        case RefKind::Unresolved: return r.text;
    }
    return {};
}

std::optional<Reference> parse_region(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    if (!text.empty() && text.front() == '=') text.remove_prefix(1);
    std::vector<Token> toks;
    try {
        toks = tokenize(text);
    } catch (const FormulaError&) {
        return std::nullopt;
    }
    if (toks.size() == 1 && toks[0].kind == TokenKind::CellRef) {
        auto r = reference_from_lexeme(toks[0].lexeme);
        if (r.kind == RefKind::Unresolved) return std::nullopt;
        return r;
    }
    if (toks.size() == 3 && toks[0].kind == TokenKind::CellRef && toks[1].lexeme == ":" &&
        toks[2].kind == TokenKind::CellRef) {
        auto a = reference_from_lexeme(toks[0].lexeme);
        auto b = reference_from_lexeme(toks[2].lexeme);
        if (a.kind != RefKind::Cell || b.kind != RefKind::Cell) return std::nullopt;
        if (!b.sheet.empty() && b.sheet != a.sheet) return std::nullopt;
        a.kind = RefKind::Range;
        a.last = b.first;
        return a;
    }
    return std::nullopt;
}

}  // namespace cellscope::formula
