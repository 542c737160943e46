#pragma once

// Structure detection over the operator-level graph: input vectors,
// isomorphic vector operations, shared subexpressions and compression.

#include "graph/graph.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cellscope::detect {

using graph::Region;

constexpr std::uint64_t kModulus = (std::uint64_t{1} << 61) - 1;

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b);
std::uint64_t pow_mod(std::uint64_t a, std::uint64_t e);

// ---------------------------------------------------------------- classes

// Class keys: "CellRef", "Numeric", "Text", "Function:IF", "Operator:>",
// "Range", "Named", "Array", "Unresolved".
class ClassTable {
public:
    ClassTable();  // the three fixed seeds

    std::uint64_t prime(const std::string& key) const;  // 0 when unknown
    // Assigns the next unused prime unless the key already has one.
    std::uint64_t intern(const std::string& key);
    // Forces a prime; used to build hand-made tables in tests.
    void set(const std::string& key, std::uint64_t prime);

    const std::map<std::string, std::uint64_t>& entries() const { return primes_; }

private:
    std::map<std::string, std::uint64_t> primes_;
    std::uint64_t last_ = 5;
};

std::string class_key(const formula::AstNode& n);

// Fixed seeds, then functions and operators in first-seen post order over the
// formula cells, then range / named / array / unresolved leaf classes.
ClassTable assign_classes(const graph::SpreadsheetGraph& g);

// ---------------------------------------------------------------- signatures

struct Signature {
    std::uint64_t hash = 1;
    int node_count = 0;
    std::string canonical;
    bool operator==(const Signature&) const = default;
};

struct SignatureOptions {
    bool loose = false;  // children sorted by canonical form
    // Member count of a named range; unknown names count as zero members.
    std::function<int(const std::string&)> named_members;
};

Signature signature(const formula::AstNode& ast, const ClassTable& table, const SignatureOptions& opts = {});

// Signatures of every subtree, indexed in pre-order.
std::vector<Signature> subtree_signatures(const formula::AstNode& ast, const ClassTable& table,
                                          const SignatureOptions& opts = {});

// Named-range member counts looked up through the graph.
SignatureOptions signature_options(const graph::SpreadsheetGraph& g, bool loose = false);

// ---------------------------------------------------------------- rectangles

struct RectangleOptions {
    int max_gap = 0;
    int stride = 1;
    // Cells that may never be bridged (non-blank cells outside the set).
    const std::set<std::pair<int, int>>* blocked = nullptr;
};

// Covers a single-sheet cell set (row, col) with rectangles grown greedily
// from row-major seeds. The returned regions carry an empty sheet name.
std::vector<Region> greedy_rectangles(const std::set<std::pair<int, int>>& cells, const RectangleOptions& opts = {});

// ---------------------------------------------------------------- detection

enum class VectorKind { InputVector, VectorOp };

struct ResolvedRef {
    formula::RefKind kind = formula::RefKind::Cell;
    std::string sheet;  // canonical sheet name
    int row1 = 0, col1 = 0, row2 = 0, col2 = 0;
    std::string name;  // named / unresolved text
    bool operator==(const ResolvedRef&) const = default;
};

// One formula cell prepared for isomorphism checks.
struct CellProfile {
    CellAddress address;
    int formula = -1;  // index into g.formulas
    Signature sig;
    std::vector<std::string> constants;  // ordered, numbers in shortest form
    std::vector<ResolvedRef> refs;       // post order
};

CellProfile profile_cell(const graph::SpreadsheetGraph& g, const Workbook& wb, int formula, const ClassTable& table,
                         bool loose = false);

// Reference criterion for one pair of references taken from roots a and b.
bool references_match(const ResolvedRef& x, const CellAddress& a, const ResolvedRef& y, const CellAddress& b);

struct DetectedVector {
    VectorKind kind = VectorKind::InputVector;
    Region region;
    std::vector<CellAddress> cells;  // row-major
    std::optional<Signature> sig;
    std::vector<std::string> constants;
    std::vector<std::string> reference_pattern;  // "abs:Sheet1!C3:C5" | "rel:0,-1" ...
};

struct DetectOptions {
    int max_gap = 0;
    int stride = 1;
    bool loose = false;
};

struct InputDetection {
    std::vector<DetectedVector> vectors;
    std::vector<CellAddress> assumptions;
    std::set<CellAddress> candidates;
};

InputDetection detect_input_vectors(const graph::SpreadsheetGraph& g, const Workbook& wb,
                                     const DetectOptions& opts = {});

// Groups of formula cells that are pairwise isomorphic (structure,
// constants, references), before colocation. Cells in `exclude` are skipped.
std::vector<std::vector<CellProfile>> isomorphism_groups(const graph::SpreadsheetGraph& g, const Workbook& wb,
                                                         const ClassTable& table,
                                                         const std::set<CellAddress>& exclude = {},
                                                         bool loose = false);

std::vector<DetectedVector> detect_vector_ops(const graph::SpreadsheetGraph& g, const Workbook& wb,
                                              const DetectOptions& opts = {},
                                              const std::set<CellAddress>& exclude = {});

// ---------------------------------------------------------------- CSE

struct CseGroup {
    Signature sig;
    std::vector<std::string> instances;  // owning AST node ids
};

struct CseReport {
    int min_nodes = 3;
    bool nested_counted = true;
    std::vector<CseGroup> groups;
    int distinct() const { return static_cast<int>(groups.size()); }
    double mean_size() const;
    double mean_instances() const;
};

CseReport detect_cse(const graph::SpreadsheetGraph& g, int min_nodes = 3);

// ---------------------------------------------------------------- compression

struct CompressionReport {
    int non_blank = 0;
    int input_vector_cells = 0;
    int vector_cells = 0;
    bool empty = false;  // zero denominator
    double input_pct() const { return non_blank ? static_cast<double>(input_vector_cells) / non_blank : 0; }
    double vector_pct() const { return non_blank ? static_cast<double>(vector_cells) / non_blank : 0; }
    double total_pct() const { return non_blank ? static_cast<double>(input_vector_cells + vector_cells) / non_blank : 0; }
};

CompressionReport compression(const Workbook& wb, const std::vector<DetectedVector>& inputs,
                              const std::vector<DetectedVector>& ops);

// ---------------------------------------------------------------- pipeline

struct AnalyzeOptions {
    DetectOptions detect;
    int cse_min_nodes = 3;
    unsigned threads = 0;
};

struct AnalysisReport {
    std::string source;
    graph::ParseReport parse;
    InputDetection inputs;
    std::vector<DetectedVector> vector_ops;
    CseReport cse;
    CompressionReport compression;
    double seconds = 0;
};

AnalysisReport analyze(const Workbook& wb, const AnalyzeOptions& opts = {}, std::string source = {});
AnalysisReport analyze(const graph::SpreadsheetGraph& fine, const Workbook& wb, const AnalyzeOptions& opts = {},
                       std::string source = {});

// {inputVectors, vectorOps, assumptions, cse, compression, parse}
std::string report_json(const AnalysisReport& r, bool include_timing = false);
std::string csv_header();
std::string csv_row(const AnalysisReport& r);

// Boundaries for the detected vectors, redrawn over the scalar boundaries;
// remaining scalar boundaries are returned unchanged.
std::vector<graph::CellBoundary> detected_boundaries(const graph::SpreadsheetGraph& g, const AnalysisReport& r);

}  // namespace cellscope::detect
