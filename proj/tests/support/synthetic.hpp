#pragma once

#include "workbook.hpp"

#include <string>

namespace cellscope::testing {

// rows x 9 block: a value column and eight chained formula columns, so the
// cell-level graph has rows * 9 nodes and no large ranges.
inline Workbook chain_workbook(int rows, const std::string& sheet = "S") {
    Workbook wb;
    wb.add_sheet(sheet);
    for (int r = 1; r <= rows; ++r) {
        wb.set_cell(Cell{CellAddress{sheet, r, 1}, static_cast<double>(r), std::nullopt});
        for (int c = 2; c <= 9; ++c) {
            std::string f = a1_label(r, c - 1) + "*2";
            if (r > 1) f += "+" + a1_label(r - 1, c);
            wb.set_cell(Cell{CellAddress{sheet, r, c}, Blank{}, f});
        }
    }
    return wb;
}

}  // namespace cellscope::testing
