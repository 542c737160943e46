#include "graph/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <thread>
#include <unordered_set>

namespace cellscope::graph {

namespace {

// Ranges larger than this only link to their non-blank members.
constexpr long kMaxBlankRangeMembers = 65536;

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::string rc(int row, int col) { return "R" + std::to_string(row) + "C" + std::to_string(col); }

struct Parsed {
    std::optional<formula::AstNode> ast;
    std::string category;
    std::string message;
};

Parsed parse_cell(const std::string& text) {
    Parsed p;
    try {
        p.ast = formula::parse_ast(text);
    } catch (const formula::FormulaError& e) {
        p.category = e.category();
        p.message = e.what();
    }
    return p;
}

NodeKind ast_node_kind(const formula::AstNode& a) {
    switch (a.kind) {
        case formula::AstKind::Function: return NodeKind::Function;
        case formula::AstKind::Operator: return NodeKind::Operator;
        default: return a.is_reference() ? NodeKind::ReferenceLeaf : NodeKind::Constant;
    }
}

class Builder {
public:
    Builder(const Workbook& wb, SpreadsheetGraph& g) : wb_(wb), g_(g) {}

    int ensure_cell(const std::string& sheet, int row, int col) {
        const Sheet* s = wb_.sheet(sheet);
        const std::string name = s ? s->name : sheet;
        const std::string id = cell_node_id(name, row, col);
        if (int i = g_.find(id); i >= 0) return i;
        GraphNode n;
        n.id = id;
        n.kind = NodeKind::Cell;
        n.sheet = name;
        n.row = row;
        n.col = col;
        n.label = a1_label(row, col);
        const Cell* c = s ? s->find(row, col) : nullptr;
        if (c) {
            n.value = value_text(c->value);
            n.value_type = value_type_name(c->value);
            if (c->formula) n.formula = "=" + *c->formula;
        } else {
            n.value_type = "blank";
            n.blank = true;
            n.unresolved = s == nullptr;
        }
        return g_.add_node(std::move(n));
    }

    // Node a reference points at; creates range / named nodes with their
    // membership edges on first use. `reach` receives cell nodes that the
    // reference makes reachable.
    int ensure_target(const formula::Reference& r, const std::string& host, std::vector<int>* reach) {
        using formula::RefKind;
        switch (r.kind) {
            case RefKind::Cell: {
                const int i = ensure_cell(r.sheet.empty() ? host : r.sheet, r.first.row, r.first.col);
                if (reach) reach->push_back(i);
                return i;
            }
            case RefKind::Range: {
                const std::string sheet_in = r.sheet.empty() ? host : r.sheet;
                const Sheet* s = wb_.sheet(sheet_in);
                const std::string sheet = s ? s->name : sheet_in;
                const int r0 = std::min(r.first.row, r.last.row), r1 = std::max(r.first.row, r.last.row);
                const int c0 = std::min(r.first.col, r.last.col), c1 = std::max(r.first.col, r.last.col);
                const std::string id = "range:" + sheet + "!" + rc(r0, c0) + ":" + rc(r1, c1);
                int i = g_.find(id);
                const bool fresh = i < 0;
                if (fresh) {
                    GraphNode n;
                    n.id = id;
                    n.kind = NodeKind::Range;
                    n.sheet = sheet;
                    n.row = r0;
                    n.col = c0;
                    n.label = a1_label(r0, c0) + ":" + a1_label(r1, c1);
                    n.unresolved = s == nullptr;
                    n.member_count = (r1 - r0 + 1) * (c1 - c0 + 1);
                    i = g_.add_node(std::move(n));
                }
                std::vector<int> members;
                const long area = static_cast<long>(r1 - r0 + 1) * (c1 - c0 + 1);
                if (!s) {
                } else if (area <= kMaxBlankRangeMembers) {
                    for (int row = r0; row <= r1; ++row)
                        for (int col = c0; col <= c1; ++col) members.push_back(ensure_cell(sheet, row, col));
                } else {
                    for (const auto& [key, cell] : s->cells)
                        if (key.first >= r0 && key.first <= r1 && key.second >= c0 && key.second <= c1)
                            members.push_back(ensure_cell(sheet, key.first, key.second));
                }
                if (fresh)
                    for (int m : members) g_.add_edge(i, m, EdgeKind::RangeMembership);
                if (reach) reach->insert(reach->end(), members.begin(), members.end());
                return i;
            }
            case RefKind::Named: {
                const NamedRange* nr = wb_.named_range(r.name);
                const std::string id = "name:" + upper(nr ? nr->name : r.name);
                int i = g_.find(id);
                const bool fresh = i < 0;
                if (fresh) {
                    GraphNode n;
                    n.id = id;
                    n.kind = NodeKind::NamedRange;
                    n.label = nr ? nr->name : r.name;
                    n.unresolved = nr == nullptr;
                    if (nr) {
                        n.formula = nr->refers_to;
                        n.member_count = static_cast<int>(nr->cells.size());
                        if (!nr->cells.empty()) {
                            n.sheet = nr->cells.front().sheet;
                            n.row = nr->cells.front().row;
                            n.col = nr->cells.front().col;
                        }
                    }
                    i = g_.add_node(std::move(n));
                }
                std::vector<int> members;
                if (nr)
                    for (const auto& a : nr->cells) members.push_back(ensure_cell(a.sheet, a.row, a.col));
                if (fresh)
                    for (int m : members) g_.add_edge(i, m, EdgeKind::RangeMembership);
                if (reach) reach->insert(reach->end(), members.begin(), members.end());
                return i;
            }
            case RefKind::Unresolved: {
                const std::string id = "unresolved:" + r.text;
                if (int i = g_.find(id); i >= 0) return i;
                GraphNode n;
                n.id = id;
                n.kind = NodeKind::Cell;
                n.label = r.text;
                n.value_type = "blank";
                n.unresolved = true;
                return g_.add_node(std::move(n));
            }
        }
        return -1;
    }

    void record_failure(const Cell& c, const Parsed& p) {
        g_.report.failures.push_back(ParseFailure{to_string(c.address), p.category, p.message});
        ++g_.report.failure_categories[p.category];
    }

    void record_unresolved(const formula::AstNode& ast) {
        for (const auto& cat : formula::unresolved_categories(ast)) ++g_.report.unresolved_categories[cat];
    }

private:
    const Workbook& wb_;
    SpreadsheetGraph& g_;
};

std::vector<const Cell*> non_blank_cells(const Workbook& wb) {
    std::vector<const Cell*> out;
    for (const auto& s : wb.sheets())
        for (const auto& [key, c] : s.cells)
            if (c.non_blank()) out.push_back(&c);
    return out;
}

}  // namespace

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Cell: return "CellNode";
        case NodeKind::Range: return "RangeNode";
        case NodeKind::NamedRange: return "NamedRangeNode";
        case NodeKind::Operator: return "OperatorNode";
        case NodeKind::Function: return "FunctionNode";
        case NodeKind::Constant: return "ConstantNode";
        case NodeKind::ReferenceLeaf: return "ReferenceLeaf";
    }
    return "?";
}

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Reference: return "ReferenceEdge";
        case EdgeKind::RangeMembership: return "RangeMembershipEdge";
        case EdgeKind::AstChild: return "AstChildEdge";
        case EdgeKind::CellRoot: return "CellRootEdge";
    }
    return "?";
}

std::optional<NodeKind> node_kind_from(std::string_view s) {
    for (auto k : {NodeKind::Cell, NodeKind::Range, NodeKind::NamedRange, NodeKind::Operator, NodeKind::Function,
                   NodeKind::Constant, NodeKind::ReferenceLeaf})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from(std::string_view s) {
    for (auto k : {EdgeKind::Reference, EdgeKind::RangeMembership, EdgeKind::AstChild, EdgeKind::CellRoot})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::string cell_node_id(const std::string& sheet, int row, int col) { return sheet + "!" + rc(row, col); }
std::string cell_node_id(const CellAddress& a) { return cell_node_id(a.sheet, a.row, a.col); }

int SpreadsheetGraph::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? -1 : it->second;
}

int SpreadsheetGraph::add_node(GraphNode n) {
    if (int i = find(n.id); i >= 0) return i;
    const int i = static_cast<int>(nodes.size());
    index_.emplace(n.id, i);
    nodes.push_back(std::move(n));
    return i;
}

void SpreadsheetGraph::add_edge(int from, int to, EdgeKind kind, int ordinal) {
    edges.push_back(GraphEdge{from, to, kind, ordinal});
}

void SpreadsheetGraph::add_formula(CellFormula f) {
    formula_index_[f.cell_node] = static_cast<int>(formulas.size());
    formulas.push_back(std::move(f));
}

int SpreadsheetGraph::formula_of(int cell_node) const {
    auto it = formula_index_.find(cell_node);
    return it == formula_index_.end() ? -1 : it->second;
}

int SpreadsheetGraph::cell_node(const CellAddress& a) const { return find(cell_node_id(a)); }

std::vector<int> SpreadsheetGraph::in_degree(EdgeKind kind) const {
    std::vector<int> d(nodes.size(), 0);
    for (const auto& e : edges)
        if (e.kind == kind) ++d[static_cast<std::size_t>(e.to)];
    return d;
}

std::vector<int> SpreadsheetGraph::degree() const {
    std::vector<int> d(nodes.size(), 0);
    for (const auto& e : edges) {
        ++d[static_cast<std::size_t>(e.from)];
        ++d[static_cast<std::size_t>(e.to)];
    }
    return d;
}

SpreadsheetGraph build_cell_graph(const Workbook& wb, const std::optional<CellAddress>& seed) {
    SpreadsheetGraph g;
    g.level = GraphLevel::Cell;
    Builder b(wb, g);

    std::deque<int> work;
    if (seed) {
        work.push_back(b.ensure_cell(seed->sheet, seed->row, seed->col));
    } else {
        for (const Cell* c : non_blank_cells(wb)) work.push_back(b.ensure_cell(c->address.sheet, c->address.row, c->address.col));
    }

    std::unordered_set<int> visited;
    while (!work.empty()) {
        const int i = work.front();
        work.pop_front();
        if (!visited.insert(i).second) continue;
        const GraphNode& n = g.nodes[static_cast<std::size_t>(i)];
        if (n.kind != NodeKind::Cell || !n.formula) continue;
        const Cell* c = wb.cell(CellAddress{n.sheet, n.row, n.col});
        if (!c) continue;
        ++g.report.formulas;
        const Parsed p = parse_cell(*c->formula);
        if (!p.ast) {
            b.record_failure(*c, p);
            continue;
        }
        ++g.report.parsed;
        b.record_unresolved(*p.ast);
        const std::string host = c->address.sheet;
        std::set<int> linked;
        for (const auto& r : formula::references_of(*p.ast)) {
            std::vector<int> reach;
            const int t = b.ensure_target(r, host, &reach);
            if (linked.insert(t).second) g.add_edge(i, t, EdgeKind::Reference);
            for (int m : reach)
                if (!visited.count(m)) work.push_back(m);
        }
    }
    return g;
}

SpreadsheetGraph build_fine_graph(const Workbook& wb, unsigned threads) {
    SpreadsheetGraph g;
    g.level = GraphLevel::Fine;
    Builder b(wb, g);

    const auto cells = non_blank_cells(wb);
    std::vector<std::size_t> formula_cells;
    for (std::size_t k = 0; k < cells.size(); ++k)
        if (cells[k]->formula) formula_cells.push_back(k);

    // Parse in parallel; assembly below is single-threaded and ordered.
    std::vector<Parsed> parsed(formula_cells.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, formula_cells.size() / 64)));
    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) parsed[k] = parse_cell(*cells[formula_cells[k]]->formula);
    };
    if (threads <= 1) {
        work(0, formula_cells.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (formula_cells.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(formula_cells.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    for (const Cell* c : cells) b.ensure_cell(c->address.sheet, c->address.row, c->address.col);

    for (std::size_t k = 0; k < formula_cells.size(); ++k) {
        const Cell& c = *cells[formula_cells[k]];
        ++g.report.formulas;
        const Parsed& p = parsed[k];
        if (!p.ast) {
            b.record_failure(c, p);
            continue;
        }
        ++g.report.parsed;
        b.record_unresolved(*p.ast);

        const int cell = g.cell_node(c.address);
        const std::string cell_id = g.nodes[static_cast<std::size_t>(cell)].id;
        CellFormula cf;
        cf.cell_node = cell;
        cf.ast = *p.ast;

        // pre-order walk
        struct Item {
            const formula::AstNode* node;
            int parent;
            int ordinal;
        };
        std::vector<Item> stack{{&cf.ast, -1, 0}};
        while (!stack.empty()) {
            const Item it = stack.back();
            stack.pop_back();
            const formula::AstNode& a = *it.node;
            GraphNode n;
            n.id = cell_id + "/ast/" + std::to_string(cf.ast_nodes.size());
            n.kind = ast_node_kind(a);
            n.sheet = c.address.sheet;
            n.row = c.address.row;
            n.col = c.address.col;
            n.label = (a.kind == formula::AstKind::Function || a.kind == formula::AstKind::Operator)
                          ? a.text
                          : formula::to_formula(a);
            n.ast_kind = formula::to_string(a.kind);
            n.owner = cell;
            const int idx = g.add_node(std::move(n));
            cf.ast_nodes.push_back(idx);
            if (it.parent < 0) {
                cf.root_node = idx;
                g.add_edge(cell, idx, EdgeKind::CellRoot);
            } else {
                g.add_edge(it.parent, idx, EdgeKind::AstChild, it.ordinal);
            }
            if (a.is_reference()) {
                formula::Reference r = a.ref;
                const int t = b.ensure_target(r, c.address.sheet, nullptr);
                g.add_edge(idx, t, EdgeKind::Reference);
            }
            for (std::size_t ch = a.children.size(); ch-- > 0;)
                stack.push_back(Item{&a.children[ch], idx, static_cast<int>(ch)});
        }
        g.add_formula(std::move(cf));
    }
    return g;
}

// ---------------------------------------------------------------- boundaries

const char* to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::ScalarCell: return "scalar-cell";
        case BoundaryKind::InputVector: return "input-vector";
        case BoundaryKind::VectorOp: return "vector-op";
        case BoundaryKind::SharedSubexpression: return "shared-subexpression";
    }
    return "?";
}

std::string to_string(const Region& r) {
    std::string s = r.sheet + "!" + a1_label(r.row1, r.col1);
    if (r.row1 != r.row2 || r.col1 != r.col2) s += ":" + a1_label(r.row2, r.col2);
    return s;
}

std::vector<CellBoundary> boundaries_of(const SpreadsheetGraph& g) {
    std::vector<CellBoundary> out;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        if (n.kind != NodeKind::Cell || n.blank || n.unresolved) continue;
        CellBoundary b;
        b.id = "cell:" + n.id;
        b.kind = BoundaryKind::ScalarCell;
        b.root = n.id;
        b.members.push_back(n.id);
        if (const int f = g.formula_of(static_cast<int>(i)); f >= 0)
            for (int a : g.formulas[static_cast<std::size_t>(f)].ast_nodes)
                b.members.push_back(g.nodes[static_cast<std::size_t>(a)].id);
        std::sort(b.members.begin(), b.members.end());
        b.region = Region{n.sheet, n.row, n.col, n.row, n.col};
        out.push_back(std::move(b));
    }
    return out;
}

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
}

}  // namespace

BoundaryOverlap::BoundaryOverlap(std::vector<std::string> ids)
    : std::invalid_argument("boundaries overlap on nodes: " + join(ids)), ids_(std::move(ids)) {}

CellBoundary redraw(const SpreadsheetGraph& g, const std::vector<CellBoundary>& parts, BoundaryKind kind,
                    std::string templ) {
    if (parts.empty()) throw std::invalid_argument("redraw needs at least one boundary");
    std::set<std::string> seen;
    std::vector<std::string> overlap;
    for (const auto& p : parts)
        for (const auto& m : p.members) {
            if (g.find(m) < 0) throw std::invalid_argument("boundary member '" + m + "' is not in the graph");
            if (!seen.insert(m).second) overlap.push_back(m);
        }
    if (!overlap.empty()) {
        std::sort(overlap.begin(), overlap.end());
        overlap.erase(std::unique(overlap.begin(), overlap.end()), overlap.end());
        throw BoundaryOverlap(std::move(overlap));
    }

    CellBoundary b;
    b.kind = kind;
    b.members.assign(seen.begin(), seen.end());
    b.root = parts.front().root;
    b.templ = std::move(templ);
    b.children = parts;

    // Region when the member cell nodes tile a rectangle on one sheet.
    std::set<std::pair<int, int>> cells;
    std::string sheet;
    bool one_sheet = true;
    for (const auto& m : b.members) {
        const GraphNode& n = g.nodes[static_cast<std::size_t>(g.find(m))];
        if (n.kind != NodeKind::Cell || n.unresolved) continue;
        if (sheet.empty()) sheet = n.sheet;
        one_sheet = one_sheet && n.sheet == sheet;
        cells.emplace(n.row, n.col);
    }
    if (one_sheet && !cells.empty()) {
        Region r{sheet, cells.begin()->first, cells.begin()->second, cells.begin()->first, cells.begin()->second};
        for (const auto& [row, col] : cells) {
            r.row1 = std::min(r.row1, row);
            r.row2 = std::max(r.row2, row);
            r.col1 = std::min(r.col1, col);
            r.col2 = std::max(r.col2, col);
        }
        if (static_cast<long>(cells.size()) == static_cast<long>(r.area())) b.region = r;
    }

    if (b.region) {
        b.id = std::string(to_string(kind)) + ":" + to_string(*b.region);
    } else {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a over member ids
        for (const auto& m : b.members)
            for (unsigned char ch : m + "\n") h = (h ^ ch) * 1099511628211ull;
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        b.id = std::string(to_string(kind)) + ":" + buf;
    }
    if (parts.size() == 1 && b.id == parts.front().id) b.id += "#1";
    return b;
}

void assign_boundaries(SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries) {
    for (auto& n : g.nodes) n.boundary_id.clear();
    for (const auto& b : boundaries)
        for (const auto& m : b.members)
            if (const int i = g.find(m); i >= 0) g.nodes[static_cast<std::size_t>(i)].boundary_id = b.id;
}

}  // namespace cellscope::graph
