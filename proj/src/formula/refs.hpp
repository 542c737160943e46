#pragma once

// Internal helpers for reference lexemes.

#include "formula/formula.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace cellscope::formula {

inline constexpr int kMaxRows = 1048576;
inline constexpr int kMaxCols = 16384;

// "$B$3" -> corner; nullopt unless the whole text is a cell address in bounds.
std::optional<RefCorner> parse_cell_part(std::string_view text);
bool is_column_part(std::string_view text);  // "$AB"
bool is_row_part(std::string_view text);     // "$12"

struct SheetPrefix {
    std::string sheet;  // unquoted
    std::string_view rest;
    bool external = false;
};

SheetPrefix split_sheet(std::string_view lexeme);

// A cellRef token lexeme as a reference. Whole rows/columns and external
// workbook paths come back as unresolved.
Reference reference_from_lexeme(std::string_view lexeme);

bool sheet_needs_quotes(std::string_view sheet);

}  // namespace cellscope::formula
