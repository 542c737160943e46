#include "detect/detect.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace cellscope::detect {

using formula::AstKind;
using formula::AstNode;
using graph::SpreadsheetGraph;

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % kModulus);
}

std::uint64_t pow_mod(std::uint64_t a, std::uint64_t e) {
    std::uint64_t r = 1;
    a %= kModulus;
    while (e) {
        if (e & 1) r = mul_mod(r, a);
        a = mul_mod(a, a);
        e >>= 1;
    }
    return r;
}

// ---------------------------------------------------------------- classes

namespace {

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

void post_order(const AstNode& n, const std::function<void(const AstNode&)>& f) {
    for (const auto& c : n.children) post_order(c, f);
    f(n);
}

}  // namespace

ClassTable::ClassTable() : primes_{{"CellRef", 2}, {"Numeric", 3}, {"Text", 5}} {}

std::uint64_t ClassTable::prime(const std::string& key) const {
    auto it = primes_.find(key);
    return it == primes_.end() ? 0 : it->second;
}

std::uint64_t ClassTable::intern(const std::string& key) {
    if (auto p = prime(key)) return p;
    do ++last_;
    while (!is_prime(last_));
    primes_[key] = last_;
    return last_;
}

void ClassTable::set(const std::string& key, std::uint64_t p) {
    primes_[key] = p;
    last_ = std::max(last_, p);
}

std::string class_key(const AstNode& n) {
    switch (n.kind) {
        case AstKind::Function: return "Function:" + n.text;
        case AstKind::Operator: return "Operator:" + n.text;
        case AstKind::NumberConst:
        case AstKind::BoolConst: return "Numeric";
        case AstKind::TextConst:
        case AstKind::ErrorConst: return "Text";
        case AstKind::CellReference: return "CellRef";
        case AstKind::RangeReference: return "Range";
        case AstKind::NamedReference: return "Named";
        case AstKind::ArrayConst: return "Array";
        case AstKind::UnresolvedReference: return "Unresolved";
    }
    return "?";
}

ClassTable assign_classes(const SpreadsheetGraph& g) {
    ClassTable t;
    for (const auto& f : g.formulas)
        post_order(f.ast, [&](const AstNode& n) {
            if (n.kind == AstKind::Function || n.kind == AstKind::Operator) t.intern(class_key(n));
        });
    for (const auto& f : g.formulas)
        post_order(f.ast, [&](const AstNode& n) {
            if (n.kind == AstKind::RangeReference || n.kind == AstKind::NamedReference ||
                n.kind == AstKind::ArrayConst || n.kind == AstKind::UnresolvedReference)
                t.intern(class_key(n));
        });
    return t;
}

// ---------------------------------------------------------------- signatures

namespace {

int range_members(const formula::Reference& r) {
    return (std::abs(r.last.row - r.first.row) + 1) * (std::abs(r.last.col - r.first.col) + 1);
}

struct SigWalker {
    const ClassTable& table;
    const SignatureOptions& opts;
    std::vector<Signature>* all = nullptr;  // pre-order slots

    std::uint64_t prime_of(const AstNode& n) const {
        const std::string key = class_key(n);
        const auto p = table.prime(key);
        if (!p) throw std::out_of_range("no equivalence class for " + key);
        return p;
    }

    Signature walk(const AstNode& n) {
        std::size_t slot = 0;
        if (all) {
            slot = all->size();
            all->emplace_back();
        }
        Signature s;
        s.node_count = 1;
        s.hash = prime_of(n);
        switch (n.kind) {
            case AstKind::CellReference: s.canonical = "c"; break;
            case AstKind::NumberConst:
            case AstKind::BoolConst: s.canonical = "n"; break;
            case AstKind::TextConst:
            case AstKind::ErrorConst: s.canonical = "t"; break;
            case AstKind::ArrayConst: s.canonical = "a"; break;
            case AstKind::UnresolvedReference: s.canonical = "u"; break;
            case AstKind::RangeReference: {
                const int k = range_members(n.ref);
                s.hash = mul_mod(s.hash, pow_mod(table.prime("CellRef"), static_cast<std::uint64_t>(k)));
                s.canonical = "R" + std::to_string(k);
                break;
            }
            case AstKind::NamedReference: {
                const int k = opts.named_members ? opts.named_members(n.ref.name) : 0;
                s.hash = mul_mod(s.hash, pow_mod(table.prime("CellRef"), static_cast<std::uint64_t>(k)));
                s.canonical = "N" + std::to_string(k);
                break;
            }
            case AstKind::Function:
            case AstKind::Operator: {
                std::vector<std::string> parts;
                for (const auto& c : n.children) {
                    Signature cs = walk(c);
                    s.hash = mul_mod(s.hash, cs.hash);
                    s.node_count += cs.node_count;
                    parts.push_back(std::move(cs.canonical));
                }
                if (opts.loose) std::sort(parts.begin(), parts.end());
                s.canonical = n.text + "(";
                for (std::size_t i = 0; i < parts.size(); ++i) s.canonical += (i ? "," : "") + parts[i];
                s.canonical += ")";
                break;
            }
        }
        if (all) (*all)[slot] = s;
        return s;
    }
};

}  // namespace

Signature signature(const AstNode& ast, const ClassTable& table, const SignatureOptions& opts) {
    SigWalker w{table, opts};
    return w.walk(ast);
}

std::vector<Signature> subtree_signatures(const AstNode& ast, const ClassTable& table, const SignatureOptions& opts) {
    std::vector<Signature> all;
    SigWalker w{table, opts, &all};
    w.walk(ast);
    return all;
}

SignatureOptions signature_options(const SpreadsheetGraph& g, bool loose) {
    SignatureOptions o;
    o.loose = loose;
    o.named_members = [&g](const std::string& name) {
        std::string id = "name:" + name;
        std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::toupper(c); });
        const int i = g.find(id);
        return i < 0 ? 0 : g.nodes[static_cast<std::size_t>(i)].member_count;
    };
    return o;
}

// ---------------------------------------------------------------- profiles

namespace {

std::string constant_text(const AstNode& n) {
    switch (n.kind) {
        case AstKind::NumberConst: return "n:" + value_text(Value{n.number});
        case AstKind::BoolConst: return n.boolean ? "b:TRUE" : "b:FALSE";
        case AstKind::TextConst: return "t:" + n.text;
        case AstKind::ErrorConst: return "e:" + n.text;
        case AstKind::ArrayConst: return "a:" + n.text;
        default: return {};
    }
}

void collect_constants(const AstNode& n, std::vector<std::string>& out) {
    if (n.is_constant()) out.push_back(constant_text(n));
    for (const auto& c : n.children) collect_constants(c, out);
}

std::string canonical_sheet(const Workbook& wb, const std::string& sheet) {
    const Sheet* s = wb.sheet(sheet);
    return s ? s->name : sheet;
}

ResolvedRef resolve(const formula::Reference& r, const std::string& host, const Workbook& wb) {
    ResolvedRef x;
    x.kind = r.kind;
    switch (r.kind) {
        case formula::RefKind::Cell:
        case formula::RefKind::Range:
            x.sheet = canonical_sheet(wb, r.sheet.empty() ? host : r.sheet);
            x.row1 = r.first.row;
            x.col1 = r.first.col;
            x.row2 = r.last.row;
            x.col2 = r.last.col;
            break;
        case formula::RefKind::Named:
            x.name = r.name;
            break;
        case formula::RefKind::Unresolved:
            x.name = r.text;
            break;
    }
    return x;
}

std::string target_text(const ResolvedRef& r) {
    switch (r.kind) {
        case formula::RefKind::Cell: return r.sheet + "!" + a1_label(r.row1, r.col1);
        case formula::RefKind::Range:
            return r.sheet + "!" + a1_label(r.row1, r.col1) + ":" + a1_label(r.row2, r.col2);
        default: return r.name;
    }
}

std::string offset_text(const ResolvedRef& r, const CellAddress& a) {
    auto d = [&](int row, int col) { return std::to_string(row - a.row) + "," + std::to_string(col - a.col); };
    if (r.kind == formula::RefKind::Range) return d(r.row1, r.col1) + ":" + d(r.row2, r.col2);
    return d(r.row1, r.col1);
}

bool same_target(const ResolvedRef& x, const ResolvedRef& y) { return x == y; }

bool all_refs_match(const CellProfile& a, const CellProfile& b) {
    if (a.refs.size() != b.refs.size()) return false;
    for (std::size_t i = 0; i < a.refs.size(); ++i)
        if (!references_match(a.refs[i], a.address, b.refs[i], b.address)) return false;
    return true;
}

std::set<std::pair<int, int>> blocked_cells(const Workbook& wb, const std::string& sheet,
                                            const std::set<std::pair<int, int>>& set) {
    std::set<std::pair<int, int>> out;
    if (const Sheet* s = wb.sheet(sheet))
        for (const auto& [key, c] : s->cells)
            if (c.non_blank() && !set.count(key)) out.insert(key);
    return out;
}

bool address_less(const Workbook& wb, const CellAddress& a, const CellAddress& b) {
    const int sa = wb.sheet_index(a.sheet), sb = wb.sheet_index(b.sheet);
    if (sa != sb) return sa < sb;
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
}

// Rectangles over a per-sheet cell map; calls `emit` for each region with
// at least two present cells.
template <typename Emit>
void rectangles_by_sheet(const Workbook& wb, const std::vector<CellAddress>& cells, const DetectOptions& opts,
                         Emit emit) {
    std::map<int, std::pair<std::string, std::set<std::pair<int, int>>>> by_sheet;
    for (const auto& a : cells) {
        auto& slot = by_sheet[wb.sheet_index(a.sheet)];
        slot.first = a.sheet;
        slot.second.emplace(a.row, a.col);
    }
    for (const auto& [idx, entry] : by_sheet) {
        const auto& [sheet, set] = entry;
        const auto blocked = blocked_cells(wb, sheet, set);
        RectangleOptions ro{opts.max_gap, opts.stride, &blocked};
        for (auto region : greedy_rectangles(set, ro)) {
            region.sheet = sheet;
            std::vector<CellAddress> members;
            for (const auto& [r, c] : set)
                if (region.contains(r, c) && (r - region.row1) % std::max(1, opts.stride) == 0 &&
                    (c - region.col1) % std::max(1, opts.stride) == 0)
                    members.push_back(CellAddress{sheet, r, c});
            emit(region, std::move(members));
        }
    }
}

}  // namespace

CellProfile profile_cell(const SpreadsheetGraph& g, const Workbook& wb, int formula, const ClassTable& table,
                         bool loose) {
    const auto& cf = g.formulas.at(static_cast<std::size_t>(formula));
    const auto& n = g.nodes[static_cast<std::size_t>(cf.cell_node)];
    CellProfile p;
    p.address = CellAddress{n.sheet, n.row, n.col};
    p.formula = formula;
    p.sig = signature(cf.ast, table, signature_options(g, loose));
    collect_constants(cf.ast, p.constants);
    for (const auto& r : formula::references_of(cf.ast)) p.refs.push_back(resolve(r, n.sheet, wb));
    return p;
}

bool references_match(const ResolvedRef& x, const CellAddress& a, const ResolvedRef& y, const CellAddress& b) {
    if (x.kind != y.kind) return false;
    if (same_target(x, y)) return true;
    if (x.kind != formula::RefKind::Cell && x.kind != formula::RefKind::Range) return false;
    if (x.sheet != y.sheet) return false;
    return x.row1 - a.row == y.row1 - b.row && x.col1 - a.col == y.col1 - b.col && x.row2 - a.row == y.row2 - b.row &&
           x.col2 - a.col == y.col2 - b.col;
}

// ---------------------------------------------------------------- inputs

InputDetection detect_input_vectors(const SpreadsheetGraph& g, const Workbook& wb, const DetectOptions& opts) {
    InputDetection out;
    const auto refs_in = g.in_degree(graph::EdgeKind::Reference);
    const auto members_in = g.in_degree(graph::EdgeKind::RangeMembership);
    std::vector<CellAddress> cands;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        if (n.kind != graph::NodeKind::Cell || n.blank || n.unresolved) continue;
        if (refs_in[i] + members_in[i] == 0) continue;
        if (n.formula) {
            const int f = g.formula_of(static_cast<int>(i));
            if (f < 0) continue;  // unparsed formula: unknown references
            if (!formula::references_of(g.formulas[static_cast<std::size_t>(f)].ast).empty()) continue;
        }
        cands.push_back(CellAddress{n.sheet, n.row, n.col});
    }
    out.candidates.insert(cands.begin(), cands.end());
    rectangles_by_sheet(wb, cands, opts, [&](const Region& region, std::vector<CellAddress> members) {
        if (members.size() >= 2) {
            DetectedVector v;
            v.kind = VectorKind::InputVector;
            v.region = region;
            v.cells = std::move(members);
            out.vectors.push_back(std::move(v));
        } else {
            out.assumptions.insert(out.assumptions.end(), members.begin(), members.end());
        }
    });
    std::sort(out.assumptions.begin(), out.assumptions.end(),
              [&](const CellAddress& a, const CellAddress& b) { return address_less(wb, a, b); });
    return out;
}

// ---------------------------------------------------------------- vector ops

std::vector<std::vector<CellProfile>> isomorphism_groups(const SpreadsheetGraph& g, const Workbook& wb,
                                                         const ClassTable& table, const std::set<CellAddress>& exclude,
                                                         bool loose) {
    // hash -> canonical/constants bucket -> groups (ids into `groups`)
    std::vector<std::vector<CellProfile>> groups;
    std::unordered_map<std::uint64_t, std::map<std::pair<std::string, std::vector<std::string>>, std::vector<std::size_t>>>
        buckets;
    for (std::size_t f = 0; f < g.formulas.size(); ++f) {
        CellProfile p = profile_cell(g, wb, static_cast<int>(f), table, loose);
        if (exclude.count(p.address)) continue;
        auto& bucket = buckets[p.sig.hash][{p.sig.canonical, p.constants}];
        bool placed = false;
        for (std::size_t gi : bucket) {
            auto& grp = groups[gi];
            if (std::all_of(grp.begin(), grp.end(), [&](const CellProfile& q) { return all_refs_match(q, p); })) {
                grp.push_back(std::move(p));
                placed = true;
                break;
            }
        }
        if (!placed) {
            bucket.push_back(groups.size());
            groups.push_back({std::move(p)});
        }
    }
    return groups;
}

std::vector<DetectedVector> detect_vector_ops(const SpreadsheetGraph& g, const Workbook& wb, const DetectOptions& opts,
                                              const std::set<CellAddress>& exclude) {
    const ClassTable table = assign_classes(g);
    std::set<CellAddress> skip = exclude;
    const auto inputs = detect_input_vectors(g, wb, opts);
    skip.insert(inputs.candidates.begin(), inputs.candidates.end());

    std::vector<DetectedVector> out;
    for (const auto& grp : isomorphism_groups(g, wb, table, skip, opts.loose)) {
        if (grp.size() < 2) continue;
        std::map<CellAddress, const CellProfile*> by_addr;
        std::vector<CellAddress> cells;
        for (const auto& p : grp) {
            by_addr[p.address] = &p;
            cells.push_back(p.address);
        }
        rectangles_by_sheet(wb, cells, opts, [&](const Region& region, std::vector<CellAddress> members) {
            if (members.size() < 2) return;
            DetectedVector v;
            v.kind = VectorKind::VectorOp;
            v.region = region;
            const CellProfile& first = *by_addr.at(members.front());
            v.sig = first.sig;
            v.constants = first.constants;
            for (std::size_t i = 0; i < first.refs.size(); ++i) {
                bool shared = true;
                for (const auto& m : members) shared = shared && same_target(by_addr.at(m)->refs[i], first.refs[i]);
                v.reference_pattern.push_back(shared ? "abs:" + target_text(first.refs[i])
                                                     : "rel:" + offset_text(first.refs[i], first.address));
            }
            v.cells = std::move(members);
            out.push_back(std::move(v));
        });
    }
    std::sort(out.begin(), out.end(), [&](const DetectedVector& a, const DetectedVector& b) {
        return address_less(wb, CellAddress{a.region.sheet, a.region.row1, a.region.col1},
                            CellAddress{b.region.sheet, b.region.row1, b.region.col1});
    });
    return out;
}

// ---------------------------------------------------------------- CSE

double CseReport::mean_size() const {
    if (groups.empty()) return 0;
    double s = 0;
    for (const auto& g : groups) s += g.sig.node_count;
    return s / static_cast<double>(groups.size());
}

double CseReport::mean_instances() const {
    if (groups.empty()) return 0;
    double s = 0;
    for (const auto& g : groups) s += static_cast<double>(g.instances.size());
    return s / static_cast<double>(groups.size());
}

CseReport detect_cse(const SpreadsheetGraph& g, int min_nodes) {
    CseReport rep;
    rep.min_nodes = min_nodes;
    const ClassTable table = assign_classes(g);
    const auto opts = signature_options(g);
    std::vector<CseGroup> all;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
    for (const auto& cf : g.formulas) {
        const auto sigs = subtree_signatures(cf.ast, table, opts);
        for (std::size_t k = 0; k < sigs.size(); ++k) {
            const auto& s = sigs[k];
            if (s.node_count < min_nodes) continue;
            const std::string& id = g.nodes[static_cast<std::size_t>(cf.ast_nodes[k])].id;
            auto& cands = by_hash[s.hash];
            auto it = std::find_if(cands.begin(), cands.end(),
                                   [&](std::size_t gi) { return all[gi].sig.canonical == s.canonical; });
            if (it == cands.end()) {
                cands.push_back(all.size());
                all.push_back(CseGroup{s, {id}});
            } else {
                all[*it].instances.push_back(id);
            }
        }
    }
    for (auto& grp : all)
        if (grp.instances.size() >= 2) rep.groups.push_back(std::move(grp));
    return rep;
}

// ---------------------------------------------------------------- compression

CompressionReport compression(const Workbook& wb, const std::vector<DetectedVector>& inputs,
                              const std::vector<DetectedVector>& ops) {
    CompressionReport r;
    r.non_blank = static_cast<int>(non_blank_count(wb));
    r.empty = r.non_blank == 0;
    std::set<CellAddress> in, vec;
    for (const auto& v : inputs) in.insert(v.cells.begin(), v.cells.end());
    for (const auto& v : ops)
        for (const auto& c : v.cells)
            if (!in.count(c)) vec.insert(c);
    r.input_vector_cells = static_cast<int>(in.size());
    r.vector_cells = static_cast<int>(vec.size());
    return r;
}

// ---------------------------------------------------------------- pipeline

AnalysisReport analyze(const SpreadsheetGraph& fine, const Workbook& wb, const AnalyzeOptions& opts,
                       std::string source) {
    const auto t0 = std::chrono::steady_clock::now();
    AnalysisReport r;
    r.source = std::move(source);
    r.parse = fine.report;
    r.inputs = detect_input_vectors(fine, wb, opts.detect);
    r.vector_ops = detect_vector_ops(fine, wb, opts.detect);
    r.cse = detect_cse(fine, opts.cse_min_nodes);
    r.compression = compression(wb, r.inputs.vectors, r.vector_ops);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

AnalysisReport analyze(const Workbook& wb, const AnalyzeOptions& opts, std::string source) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = graph::build_fine_graph(wb, opts.threads);
    AnalysisReport r = analyze(g, wb, opts, std::move(source));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<graph::CellBoundary> detected_boundaries(const SpreadsheetGraph& g, const AnalysisReport& r) {
    auto scalars = graph::boundaries_of(g);
    std::map<std::string, std::size_t> by_root;
    for (std::size_t i = 0; i < scalars.size(); ++i) by_root[scalars[i].root] = i;
    std::vector<bool> used(scalars.size(), false);
    std::vector<graph::CellBoundary> out;
    auto add = [&](const DetectedVector& v, graph::BoundaryKind kind) {
        std::vector<graph::CellBoundary> parts;
        for (const auto& c : v.cells) {
            auto it = by_root.find(graph::cell_node_id(c));
            if (it == by_root.end() || used[it->second]) return;
            parts.push_back(scalars[it->second]);
        }
        for (const auto& c : v.cells) used[by_root[graph::cell_node_id(c)]] = true;
        out.push_back(graph::redraw(g, parts, kind, v.sig ? v.sig->canonical : std::string()));
    };
    for (const auto& v : r.inputs.vectors) add(v, graph::BoundaryKind::InputVector);
    for (const auto& v : r.vector_ops) add(v, graph::BoundaryKind::VectorOp);
    for (std::size_t i = 0; i < scalars.size(); ++i)
        if (!used[i]) out.push_back(std::move(scalars[i]));
    return out;
}

}  // namespace cellscope::detect
