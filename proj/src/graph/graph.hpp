#pragma once

// Cell-level and operator-level dataflow graphs over a workbook, plus the
// boundary (hyperedge) view that groups graph nodes into logical cells.

#include "formula/formula.hpp"
#include "workbook.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cellscope::graph {

enum class NodeKind { Cell, Range, NamedRange, Operator, Function, Constant, ReferenceLeaf };
enum class EdgeKind { Reference, RangeMembership, AstChild, CellRoot };

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);
std::optional<NodeKind> node_kind_from(std::string_view s);
std::optional<EdgeKind> edge_kind_from(std::string_view s);

struct GraphNode {
    std::string id;
    NodeKind kind = NodeKind::Cell;
    // Location. AST nodes carry their owning cell's location; range and
    // named-range nodes carry their top-left member.
    std::string sheet;
    int row = 0;
    int col = 0;
    std::string value;       // cell value text
    std::string value_type;  // blank | number | text | boolean | error
    std::optional<std::string> formula;  // with leading "="
    std::string label;
    std::string ast_kind;  // AST nodes: NumberConst, CellReference, ...
    bool blank = false;       // referenced cell with no content
    bool unresolved = false;  // dangling reference target
    int owner = -1;           // AST nodes: index of the owning cell node
    int member_count = 0;     // range / named-range nodes
    std::string boundary_id;

    bool is_ast() const {
        return kind == NodeKind::Operator || kind == NodeKind::Function || kind == NodeKind::Constant ||
               kind == NodeKind::ReferenceLeaf;
    }
    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    int from = 0;
    int to = 0;
    EdgeKind kind = EdgeKind::Reference;
    int ordinal = -1;  // AstChild only
    bool operator==(const GraphEdge&) const = default;
};

struct ParseFailure {
    std::string cell;  // "Sheet1!C7"
    std::string category;
    std::string message;
};

struct ParseReport {
    int formulas = 0;
    int parsed = 0;
    std::vector<ParseFailure> failures;
    std::map<std::string, int> failure_categories;
    // Unresolved reference leaves inside otherwise parsed formulas.
    std::map<std::string, int> unresolved_categories;

    double parse_rate() const { return formulas ? static_cast<double>(parsed) / formulas : 1.0; }
};

// A parsed formula cell in a fine graph.
struct CellFormula {
    int cell_node = -1;
    int root_node = -1;
    formula::AstNode ast;
    std::vector<int> ast_nodes;  // graph node index per AST node, pre-order
};

enum class GraphLevel { Cell, Fine };

class SpreadsheetGraph {
public:
    GraphLevel level = GraphLevel::Cell;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<CellFormula> formulas;  // fine graphs only
    ParseReport report;

    int find(std::string_view id) const;  // -1 when absent
    int add_node(GraphNode n);            // returns existing index if the id is taken
    void add_edge(int from, int to, EdgeKind kind, int ordinal = -1);
    void add_formula(CellFormula f);

    // Index of the CellFormula for a cell node, or -1.
    int formula_of(int cell_node) const;
    // Cell node for an address, or -1.
    int cell_node(const CellAddress& a) const;

    std::vector<int> in_degree(EdgeKind kind) const;
    std::vector<int> degree() const;  // undirected, all edge kinds

private:
    std::unordered_map<std::string, int> index_;
    std::unordered_map<int, int> formula_index_;
};

std::string cell_node_id(const CellAddress& a);
std::string cell_node_id(const std::string& sheet, int row, int col);

// Cell-level graph. With a seed, the transitive closure of references from
// the seed; without, every non-blank cell plus whatever it references.
SpreadsheetGraph build_cell_graph(const Workbook& wb, const std::optional<CellAddress>& seed = std::nullopt);

// Operator-level graph: every formula cell linked to its normalized AST.
// `threads` = 0 picks the hardware concurrency.
SpreadsheetGraph build_fine_graph(const Workbook& wb, unsigned threads = 0);

// ---------------------------------------------------------------- boundaries

enum class BoundaryKind { ScalarCell, InputVector, VectorOp, SharedSubexpression };
const char* to_string(BoundaryKind k);

struct Region {
    std::string sheet;
    int row1 = 0, col1 = 0, row2 = 0, col2 = 0;
    int rows() const { return row2 - row1 + 1; }
    int cols() const { return col2 - col1 + 1; }
    int area() const { return rows() * cols(); }
    bool contains(int r, int c) const { return r >= row1 && r <= row2 && c >= col1 && c <= col2; }
    bool operator==(const Region&) const = default;
};

// "Sheet1!C3:C5" (or "Sheet1!C3" for one cell)
std::string to_string(const Region& r);

struct CellBoundary {
    std::string id;
    BoundaryKind kind = BoundaryKind::ScalarCell;
    std::vector<std::string> members;  // sorted node ids
    std::string root;
    std::optional<Region> region;
    std::string templ;
    std::vector<CellBoundary> children;
};

// One boundary per non-blank cell: its cell node plus its AST.
std::vector<CellBoundary> boundaries_of(const SpreadsheetGraph& g);

class BoundaryOverlap : public std::invalid_argument {
public:
    BoundaryOverlap(std::vector<std::string> ids);
    const std::vector<std::string>& node_ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
};

// Merges disjoint boundaries into one; throws BoundaryOverlap on shared nodes.
CellBoundary redraw(const SpreadsheetGraph& g, const std::vector<CellBoundary>& parts, BoundaryKind kind,
                    std::string templ = {});

// Writes each node's boundary_id from a boundary list (top level only).
void assign_boundaries(SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries);

// {"v":1, level, nodes, edges, boundaries}; edges name their endpoints by id.
std::string to_json(const SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries = {});

}  // namespace cellscope::graph
