#pragma once

#include "graph/graph.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cellscope::graph {

struct GraphmlOptions {
    // Boundaries also written as nested graphs (boundaryId is always written).
    bool nested = false;
};

std::string to_graphml(const SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries = {},
                       const GraphmlOptions& options = {});
void export_graphml(const SpreadsheetGraph& g, const std::filesystem::path& path,
                    const std::vector<CellBoundary>& boundaries = {}, const GraphmlOptions& options = {});

class GraphmlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GraphmlDocument {
    SpreadsheetGraph graph;
    std::vector<CellBoundary> boundaries;  // from nested graphs, if any
};

// Reads GraphML written by to_graphml. Throws GraphmlError.
GraphmlDocument from_graphml(std::string_view text);
GraphmlDocument import_graphml(const std::filesystem::path& path);

// Structural validation against the GraphML 1.0 schema rules: element
// nesting and order, required attributes, enumerations, id uniqueness, edge
// endpoints, key references and typed data values. Empty when valid.
std::vector<std::string> validate_graphml(std::string_view text);

// Describes the first difference between two graphs (nodes matched by id,
// edges compared as multisets), or empty when they are the same graph.
std::string graph_difference(const SpreadsheetGraph& a, const SpreadsheetGraph& b);

}  // namespace cellscope::graph
