#pragma once

// Brute-force reference implementations used to cross-check detection.
// They work from formula text and the workbook only, not from the graph.

#include "formula/formula.hpp"
#include "workbook.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cellscope::testing {

using formula::AstKind;
using formula::AstNode;

// Structure string: operators and functions in argument order, leaves
// abstracted to their class.
inline std::string oracle_shape(const AstNode& n) {
    switch (n.kind) {
        case AstKind::Function:
        case AstKind::Operator: {
            std::string s = n.text + "[";
            for (const auto& c : n.children) s += oracle_shape(c) + ";";
            return s + "]";
        }
        case AstKind::CellReference: return "cell";
        case AstKind::RangeReference: {
            const int k = (std::abs(n.ref.last.row - n.ref.first.row) + 1) * (std::abs(n.ref.last.col - n.ref.first.col) + 1);
            return "range" + std::to_string(k);
        }
        case AstKind::NamedReference: return "named";
        case AstKind::NumberConst:
        case AstKind::BoolConst: return "num";
        case AstKind::TextConst:
        case AstKind::ErrorConst: return "text";
        case AstKind::ArrayConst: return "array";
        case AstKind::UnresolvedReference: return "unresolved";
    }
    return "?";
}

inline void oracle_constants(const AstNode& n, std::vector<std::string>& out) {
    switch (n.kind) {
        case AstKind::NumberConst: {
            std::ostringstream os;
            os.precision(17);
            os << n.number;
            out.push_back("N" + os.str());
            break;
        }
        case AstKind::BoolConst: out.push_back(n.boolean ? "B1" : "B0"); break;
        case AstKind::TextConst: out.push_back("T" + n.text); break;
        case AstKind::ErrorConst: out.push_back("E" + n.text); break;
        case AstKind::ArrayConst: out.push_back("A" + n.text); break;
        default: break;
    }
    for (const auto& c : n.children) oracle_constants(c, out);
}

struct OracleRef {
    int kind;  // 0 cell/range, 1 named, 2 unresolved
    std::string sheet;
    int r1 = 0, c1 = 0, r2 = 0, c2 = 0;
    std::string name;
};

inline void oracle_refs(const AstNode& n, const std::string& host, const Workbook& wb, std::vector<OracleRef>& out) {
    for (const auto& c : n.children) oracle_refs(c, host, wb, out);
    if (n.kind == AstKind::CellReference || n.kind == AstKind::RangeReference) {
        OracleRef r{0, n.ref.sheet.empty() ? host : n.ref.sheet};
        if (const Sheet* s = wb.sheet(r.sheet)) r.sheet = s->name;
        r.r1 = std::min(n.ref.first.row, n.ref.last.row);
        r.r2 = std::max(n.ref.first.row, n.ref.last.row);
        r.c1 = std::min(n.ref.first.col, n.ref.last.col);
        r.c2 = std::max(n.ref.first.col, n.ref.last.col);
        if (n.kind == AstKind::CellReference) r.kind = -1;  // cell and range never match each other
        out.push_back(r);
    } else if (n.kind == AstKind::NamedReference) {
        out.push_back(OracleRef{1, "", 0, 0, 0, 0, n.ref.name});
    } else if (n.kind == AstKind::UnresolvedReference) {
        out.push_back(OracleRef{2, "", 0, 0, 0, 0, n.ref.text});
    }
}

struct OracleCell {
    CellAddress at;
    std::string shape;
    std::vector<std::string> constants;
    std::vector<OracleRef> refs;
};

inline bool oracle_ref_pair(const OracleRef& x, const CellAddress& a, const OracleRef& y, const CellAddress& b) {
    if (x.kind != y.kind) return false;
    if (x.kind == 1 || x.kind == 2) return x.name == y.name;
    if (x.sheet != y.sheet) return false;
    const bool same = x.r1 == y.r1 && x.c1 == y.c1 && x.r2 == y.r2 && x.c2 == y.c2;
    const bool offset = x.r1 - a.row == y.r1 - b.row && x.c1 - a.col == y.c1 - b.col &&
                        x.r2 - a.row == y.r2 - b.row && x.c2 - a.col == y.c2 - b.col;
    return same || offset;
}

inline bool oracle_isomorphic(const OracleCell& a, const OracleCell& b) {
    if (a.shape != b.shape || a.constants != b.constants || a.refs.size() != b.refs.size()) return false;
    for (std::size_t i = 0; i < a.refs.size(); ++i)
        if (!oracle_ref_pair(a.refs[i], a.at, b.refs[i], b.at)) return false;
    return true;
}

// Parsed formula cells in sheet order, row-major.
inline std::vector<OracleCell> oracle_cells(const Workbook& wb) {
    std::vector<OracleCell> out;
    for (const auto& s : wb.sheets())
        for (const auto& [key, c] : s.cells) {
            if (!c.formula) continue;
            try {
                const AstNode ast = formula::parse_ast(*c.formula);
                OracleCell oc{c.address, oracle_shape(ast), {}, {}};
                oracle_constants(ast, oc.constants);
                oracle_refs(ast, s.name, wb, oc.refs);
                out.push_back(std::move(oc));
            } catch (const formula::FormulaError&) {
            }
        }
    return out;
}

// Non-blank cells without references that some parsed formula references
// (directly or through a range or named range).
inline std::set<CellAddress> oracle_input_candidates(const Workbook& wb) {
    std::set<CellAddress> referenced;
    const auto cells = oracle_cells(wb);
    for (const auto& oc : cells)
        for (const auto& r : oc.refs) {
            if (r.kind <= 0) {
                for (int row = r.r1; row <= r.r2; ++row)
                    for (int col = r.c1; col <= r.c2; ++col) referenced.insert(CellAddress{r.sheet, row, col});
            } else if (r.kind == 1) {
                if (const auto* nr = wb.named_range(r.name)) referenced.insert(nr->cells.begin(), nr->cells.end());
            }
        }
    std::set<CellAddress> with_refs, parsed;
    for (const auto& oc : cells) {
        parsed.insert(oc.at);
        if (!oc.refs.empty()) with_refs.insert(oc.at);
    }
    std::set<CellAddress> out;
    for (const auto& a : referenced) {
        const Cell* c = wb.cell(a);
        if (!c || !c->non_blank()) continue;
        if (c->formula && (!parsed.count(a) || with_refs.count(a))) continue;
        out.insert(a);
    }
    return out;
}

// Global row-major greedy: each cell joins the first group all of whose
// members it is isomorphic to.
inline std::vector<std::vector<CellAddress>> oracle_partition(const Workbook& wb, const std::set<CellAddress>& exclude) {
    std::vector<std::vector<OracleCell>> groups;
    for (auto& oc : oracle_cells(wb)) {
        if (exclude.count(oc.at)) continue;
        bool placed = false;
        for (auto& g : groups) {
            if (std::all_of(g.begin(), g.end(), [&](const OracleCell& m) { return oracle_isomorphic(m, oc); })) {
                g.push_back(oc);
                placed = true;
                break;
            }
        }
        if (!placed) groups.push_back({oc});
    }
    std::vector<std::vector<CellAddress>> out;
    for (const auto& g : groups) {
        std::vector<CellAddress> v;
        for (const auto& m : g) v.push_back(m.at);
        out.push_back(std::move(v));
    }
    return out;
}

// Random small workbook: value cells plus formulas of at most six AST nodes
// built from a small alphabet so isomorphic neighbours are common.
inline Workbook random_workbook(std::mt19937_64& rng, int max_cells = 30) {
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    Workbook wb;
    const int sheets = 1 + pick(2);
    for (int s = 0; s < sheets; ++s) wb.add_sheet("S" + std::to_string(s + 1));
    const int cells = 2 + pick(max_cells - 1);

    auto ref_text = [&](int row, int col) {
        switch (pick(6)) {
            case 0: return std::string("$A$1");
            case 1: return std::string("A1:A2");
            case 2: return std::string("$B$1:$B$3");
            case 3: return a1_label(std::max(1, row - 1), col);
            case 4: return a1_label(row, std::max(1, col - 1));
            default: return a1_label(row, col + 1);
        }
    };
    // leaf count l and operator count l-1 keep the tree at <= 5 nodes for two
    // leaves, <= 6 once a function wrapper is added
    auto expr = [&](int row, int col) {
        auto leaf = [&]() -> std::string {
            switch (pick(3)) {
                case 0: return std::to_string(1 + pick(2));
                default: return ref_text(row, col);
            }
        };
        switch (pick(5)) {
            case 0: return leaf();
            case 1: return leaf() + (pick(2) ? "+" : "*") + leaf();
            case 2: return "SUM(" + leaf() + ")";
            case 3: return leaf() + "*" + leaf() + "+" + leaf();
            default: return "MAX(" + leaf() + "," + leaf() + ")";
        }
    };

    for (int i = 0; i < cells; ++i) {
        const std::string sheet = "S" + std::to_string(1 + pick(sheets));
        const int row = 1 + pick(6), col = 1 + pick(5);
        if (pick(3) == 0)
            wb.set_cell(Cell{CellAddress{sheet, row, col}, static_cast<double>(pick(9)), std::nullopt});
        else
            wb.set_cell(Cell{CellAddress{sheet, row, col}, Blank{}, expr(row, col)});
    }
    return wb;
}

inline std::size_t ast_size(const AstNode& n) {
    std::size_t k = 1;
    for (const auto& c : n.children) k += ast_size(c);
    return k;
}

}  // namespace cellscope::testing
