#include "graph/graph.hpp"

#include <json.hpp>

namespace cellscope::graph {

namespace {

using nlohmann::ordered_json;

ordered_json boundary_json(const CellBoundary& b) {
    ordered_json j;
    j["id"] = b.id;
    j["kind"] = to_string(b.kind);
    if (b.region) j["region"] = to_string(*b.region);
    if (!b.templ.empty()) j["template"] = b.templ;
    j["root"] = b.root;
    j["members"] = b.members;
    if (!b.children.empty()) {
        auto& c = j["children"] = ordered_json::array();
        for (const auto& child : b.children) c.push_back(child.id);
    }
    return j;
}

}  // namespace

std::string to_json(const SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries) {
    ordered_json j;
    j["v"] = 1;
    j["level"] = g.level == GraphLevel::Fine ? "fine" : "cell";
    auto& nodes = j["nodes"] = ordered_json::array();
    for (const auto& n : g.nodes) {
        ordered_json o;
        o["id"] = n.id;
        o["kind"] = to_string(n.kind);
        if (n.row > 0) {
            o["sheet"] = n.sheet;
            o["row"] = n.row;
            o["col"] = n.col;
        }
        o["label"] = n.label;
        if (!n.value_type.empty()) {
            o["value"] = n.value;
            o["valueType"] = n.value_type;
        }
        if (n.formula) o["formula"] = *n.formula;
        if (!n.ast_kind.empty()) o["astKind"] = n.ast_kind;
        if (n.owner >= 0) o["owner"] = g.nodes[n.owner].id;
        if (n.member_count) o["memberCount"] = n.member_count;
        if (n.blank) o["blank"] = true;
        if (n.unresolved) o["unresolved"] = true;
        if (!n.boundary_id.empty()) o["boundary"] = n.boundary_id;
        nodes.push_back(std::move(o));
    }
    auto& edges = j["edges"] = ordered_json::array();
    for (const auto& e : g.edges) {
        ordered_json o{{"from", g.nodes[e.from].id}, {"to", g.nodes[e.to].id}, {"kind", to_string(e.kind)}};
        if (e.ordinal >= 0) o["ordinal"] = e.ordinal;
        edges.push_back(std::move(o));
    }
    auto& bs = j["boundaries"] = ordered_json::array();
    for (const auto& b : boundaries) bs.push_back(boundary_json(b));
    return j.dump() + "\n";
}

}  // namespace cellscope::graph
