#include "graph/graphml.hpp"

#include "xml.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace cellscope::graph {

namespace {

constexpr const char* kNamespace = "http://graphml.graphdrawing.org/xmlns";
constexpr const char* kBoundaryKind = "Boundary";

struct KeyDef {
    const char* id;
    const char* domain;
    const char* name;
    const char* type;
};

constexpr KeyDef kKeys[] = {
    {"level", "graph", "level", "string"},
    {"kind", "node", "kind", "string"},
    {"sheet", "node", "sheet", "string"},
    {"row", "node", "row", "int"},
    {"col", "node", "col", "int"},
    {"value", "node", "value", "string"},
    {"valueType", "node", "valueType", "string"},
    {"formula", "node", "formula", "string"},
    {"label", "node", "label", "string"},
    {"astKind", "node", "astKind", "string"},
    {"owner", "node", "owner", "string"},
    {"memberCount", "node", "memberCount", "int"},
    {"flags", "node", "flags", "string"},
    {"boundaryId", "node", "boundaryId", "string"},
    {"boundaryKind", "node", "boundaryKind", "string"},
    {"region", "node", "region", "string"},
    {"template", "node", "template", "string"},
    {"root", "node", "root", "string"},
    {"edgeKind", "edge", "kind", "string"},
    {"ordinal", "edge", "ordinal", "int"},
};

void data(std::ostream& os, const std::string& indent, const char* key, const std::string& v) {
    os << indent << "<data key=\"" << key << "\">" << xml::escape(v) << "</data>\n";
}

void write_node(std::ostream& os, const SpreadsheetGraph& g, const GraphNode& n, const std::string& indent) {
    os << indent << "<node id=\"" << xml::escape(n.id) << "\">\n";
    const std::string in = indent + "  ";
    data(os, in, "kind", to_string(n.kind));
    if (!n.sheet.empty()) data(os, in, "sheet", n.sheet);
    if (n.row) data(os, in, "row", std::to_string(n.row));
    if (n.col) data(os, in, "col", std::to_string(n.col));
    if (!n.value.empty()) data(os, in, "value", n.value);
    if (!n.value_type.empty()) data(os, in, "valueType", n.value_type);
    if (n.formula) data(os, in, "formula", *n.formula);
    if (!n.label.empty()) data(os, in, "label", n.label);
    if (!n.ast_kind.empty()) data(os, in, "astKind", n.ast_kind);
    if (n.owner >= 0) data(os, in, "owner", g.nodes[static_cast<std::size_t>(n.owner)].id);
    if (n.member_count) data(os, in, "memberCount", std::to_string(n.member_count));
    std::string flags;
    if (n.blank) flags = "blank";
    if (n.unresolved) flags += flags.empty() ? "unresolved" : ",unresolved";
    if (!flags.empty()) data(os, in, "flags", flags);
    if (!n.boundary_id.empty()) data(os, in, "boundaryId", n.boundary_id);
    os << indent << "</node>\n";
}

void write_boundary(std::ostream& os, const SpreadsheetGraph& g, const CellBoundary& b, const std::string& indent,
                    std::set<std::string>& written) {
    os << indent << "<node id=\"" << xml::escape(b.id) << "\">\n";
    const std::string in = indent + "  ";
    data(os, in, "kind", kBoundaryKind);
    data(os, in, "boundaryKind", to_string(b.kind));
    if (b.region) data(os, in, "region", to_string(*b.region));
    if (!b.templ.empty()) data(os, in, "template", b.templ);
    if (!b.root.empty()) data(os, in, "root", b.root);
    os << in << "<graph id=\"" << xml::escape(b.id) << ":graph\" edgedefault=\"directed\">\n";
    for (const auto& c : b.children) write_boundary(os, g, c, in + "  ", written);
    for (const auto& m : b.members) {
        if (written.count(m)) continue;
        const int i = g.find(m);
        if (i < 0) throw GraphmlError("boundary member '" + m + "' is not in the graph");
        written.insert(m);
        write_node(os, g, g.nodes[static_cast<std::size_t>(i)], in + "  ");
    }
    os << in << "</graph>\n";
    os << indent << "</node>\n";
}

std::map<std::string, std::string> data_of(const xml::Element& e) {
    std::map<std::string, std::string> out;
    for (const auto* d : e.children_named("data")) out[d->attr_or("key")] = d->text;
    return out;
}

int to_int(const std::string& s, const char* what) {
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end || errno) throw GraphmlError(std::string("bad integer for ") + what + ": '" + s + "'");
    return static_cast<int>(v);
}

std::optional<BoundaryKind> boundary_kind_from(const std::string& s) {
    for (auto k : {BoundaryKind::ScalarCell, BoundaryKind::InputVector, BoundaryKind::VectorOp,
                   BoundaryKind::SharedSubexpression})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

std::optional<Region> region_from(const std::string& s) {
    const auto bang = s.rfind('!');
    if (bang == std::string::npos) return std::nullopt;
    auto r = formula::parse_region(s.substr(bang + 1));
    if (!r) return std::nullopt;
    return Region{s.substr(0, bang), r->first.row, r->first.col, r->last.row, r->last.col};
}

struct Reader {
    GraphmlDocument doc;
    std::vector<std::pair<int, std::string>> owners;  // resolved after all nodes are known

    void read_graph(const xml::Element& graph, CellBoundary* parent) {
        for (const auto& child : graph.children) {
            const xml::Element& e = *child;
            if (e.name == "node") {
                const auto d = data_of(e);
                auto kind = d.count("kind") ? d.at("kind") : std::string();
                if (kind == kBoundaryKind) {
                    CellBoundary b;
                    b.id = e.attr_or("id");
                    auto bk = boundary_kind_from(d.count("boundaryKind") ? d.at("boundaryKind") : "");
                    if (!bk) throw GraphmlError("boundary '" + b.id + "' has no valid boundaryKind");
                    b.kind = *bk;
                    if (d.count("region")) b.region = region_from(d.at("region"));
                    if (d.count("template")) b.templ = d.at("template");
                    if (d.count("root")) b.root = d.at("root");
                    if (const auto* sub = e.child("graph")) read_graph(*sub, &b);
                    std::sort(b.members.begin(), b.members.end());
                    if (parent) {
                        parent->members.insert(parent->members.end(), b.members.begin(), b.members.end());
                        parent->children.push_back(std::move(b));
                    } else {
                        doc.boundaries.push_back(std::move(b));
                    }
                    continue;
                }
                GraphNode n;
                n.id = e.attr_or("id");
                auto nk = node_kind_from(kind);
                if (!nk) throw GraphmlError("node '" + n.id + "' has unknown kind '" + kind + "'");
                n.kind = *nk;
                auto get = [&](const char* k) { return d.count(k) ? d.at(k) : std::string(); };
                n.sheet = get("sheet");
                if (d.count("row")) n.row = to_int(d.at("row"), "row");
                if (d.count("col")) n.col = to_int(d.at("col"), "col");
                n.value = get("value");
                n.value_type = get("valueType");
                if (d.count("formula")) n.formula = d.at("formula");
                n.label = get("label");
                n.ast_kind = get("astKind");
                if (d.count("memberCount")) n.member_count = to_int(d.at("memberCount"), "memberCount");
                const std::string flags = get("flags");
                n.blank = flags.find("blank") != std::string::npos;
                n.unresolved = flags.find("unresolved") != std::string::npos;
                n.boundary_id = get("boundaryId");
                if (doc.graph.find(n.id) >= 0) throw GraphmlError("duplicate node id '" + n.id + "'");
                const std::string id = n.id;
                const int idx = doc.graph.add_node(std::move(n));
                if (d.count("owner")) owners.emplace_back(idx, d.at("owner"));
                if (parent) parent->members.push_back(id);
            } else if (e.name == "edge") {
                const int from = doc.graph.find(e.attr_or("source"));
                const int to = doc.graph.find(e.attr_or("target"));
                if (from < 0 || to < 0)
                    throw GraphmlError("edge endpoint not found: " + e.attr_or("source") + " -> " + e.attr_or("target"));
                const auto d = data_of(e);
                auto ek = edge_kind_from(d.count("edgeKind") ? d.at("edgeKind") : "");
                if (!ek) throw GraphmlError("edge without a valid kind");
                const int ordinal = d.count("ordinal") ? to_int(d.at("ordinal"), "ordinal") : -1;
                doc.graph.add_edge(from, to, *ek, ordinal);
            }
        }
    }
};

// ---------------------------------------------------------------- validation

struct Validator {
    std::vector<std::string> errors;
    std::map<std::string, std::pair<std::string, std::string>> keys;  // id -> (for, type)
    std::set<std::string> node_ids;
    std::set<std::string> edge_ids;
    std::set<std::string> graph_ids;
    std::vector<std::pair<std::string, std::string>> edges;  // endpoints checked at the end

    void err(const std::string& s) { errors.push_back(s); }

    static bool typed_ok(const std::string& type, const std::string& v) {
        if (type == "string") return true;
        if (type == "boolean") return v == "true" || v == "false";
        const char* b = v.c_str();
        char* end = nullptr;
        if (type == "int" || type == "long") {
            (void)std::strtoll(b, &end, 10);
        } else if (type == "float" || type == "double") {
            (void)std::strtod(b, &end);
        } else {
            return false;
        }
        return !v.empty() && *end == '\0';
    }

    void check_data(const xml::Element& d, const std::string& domain) {
        const auto* key = d.attr("key");
        if (!key) return err("<data> without key attribute");
        auto it = keys.find(*key);
        if (it == keys.end()) return err("<data> references undeclared key '" + *key + "'");
        const auto& [dom, type] = it->second;
        if (dom != "all" && dom != domain) err("key '" + *key + "' is declared for " + dom + ", used on " + domain);
        if (!typed_ok(type, d.text)) err("value '" + d.text + "' is not a valid " + type + " for key '" + *key + "'");
        if (!d.children.empty()) err("<data> for key '" + *key + "' has element content");
    }

    // Elements in `seq` must appear in the given group order; returns false
    // and records an error when an element is unexpected or out of order.
    void check_order(const xml::Element& e, const std::vector<std::set<std::string>>& groups) {
        std::size_t g = 0;
        for (const auto& c : e.children) {
            while (g < groups.size() && !groups[g].count(c->name)) ++g;
            if (g == groups.size()) {
                err("<" + c->name + "> not allowed (or out of order) inside <" + e.name + ">");
                return;
            }
        }
    }

    void check_graph(const xml::Element& graph) {
        check_order(graph, {{"desc"}, {"data"}, {"node", "edge", "hyperedge"}, {"locator"}});
        const auto ed = graph.attr_or("edgedefault");
        if (ed != "directed" && ed != "undirected") err("<graph> edgedefault must be directed or undirected");
        if (const auto* id = graph.attr("id"))
            if (!graph_ids.insert(*id).second) err("duplicate graph id '" + *id + "'");
        for (const auto& c : graph.children) {
            if (c->name == "data") check_data(*c, "graph");
            else if (c->name == "node") check_node(*c);
            else if (c->name == "edge") check_edge(*c);
        }
    }

    void check_node(const xml::Element& n) {
        check_order(n, {{"desc"}, {"data", "port"}, {"graph", "locator"}});
        const auto* id = n.attr("id");
        if (!id) err("<node> without id");
        else if (!node_ids.insert(*id).second) err("duplicate node id '" + *id + "'");
        int graphs = 0;
        for (const auto& c : n.children) {
            if (c->name == "data") check_data(*c, "node");
            if (c->name == "graph") {
                ++graphs;
                check_graph(*c);
            }
        }
        if (graphs > 1) err("<node> contains more than one <graph>");
    }

    void check_edge(const xml::Element& e) {
        check_order(e, {{"desc"}, {"data"}, {"graph"}});
        const auto* s = e.attr("source");
        const auto* t = e.attr("target");
        if (!s || !t) err("<edge> needs source and target");
        else edges.emplace_back(*s, *t);
        if (const auto* id = e.attr("id"))
            if (!edge_ids.insert(*id).second) err("duplicate edge id '" + *id + "'");
        if (const auto* d = e.attr("directed"))
            if (*d != "true" && *d != "false") err("<edge> directed must be true or false");
        for (const auto& c : e.children)
            if (c->name == "data") check_data(*c, "edge");
    }

    void run(const xml::Element& root) {
        if (root.name != "graphml") return err("root element is <" + root.name + ">, expected <graphml>");
        if (root.attr_or("xmlns") != kNamespace) err("root element is not in the GraphML namespace");
        check_order(root, {{"desc"}, {"key"}, {"data", "graph"}});
        static const std::set<std::string> domains = {"all", "graphml", "graph", "node", "edge", "hyperedge", "port", "endpoint"};
        static const std::set<std::string> types = {"boolean", "int", "long", "float", "double", "string"};
        for (const auto* k : root.children_named("key")) {
            const auto* id = k->attr("id");
            if (!id) {
                err("<key> without id");
                continue;
            }
            const std::string dom = k->attr_or("for", "all");
            const std::string type = k->attr_or("attr.type", "string");
            if (!domains.count(dom)) err("key '" + *id + "' has invalid for='" + dom + "'");
            if (!types.count(type)) err("key '" + *id + "' has invalid attr.type='" + type + "'");
            if (!keys.emplace(*id, std::make_pair(dom, type)).second) err("duplicate key id '" + *id + "'");
        }
        for (const auto& c : root.children) {
            if (c->name == "graph") check_graph(*c);
            if (c->name == "data") check_data(*c, "graphml");
        }
        for (const auto& [s, t] : edges) {
            if (!node_ids.count(s)) err("edge source '" + s + "' is not a node");
            if (!node_ids.count(t)) err("edge target '" + t + "' is not a node");
        }
    }
};

}  // namespace

std::string to_graphml(const SpreadsheetGraph& g, const std::vector<CellBoundary>& boundaries,
                       const GraphmlOptions& options) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<graphml xmlns=\"" << kNamespace << "\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\""
       << " xsi:schemaLocation=\"" << kNamespace << " http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
    for (const auto& k : kKeys)
        os << "  <key id=\"" << k.id << "\" for=\"" << k.domain << "\" attr.name=\"" << k.name << "\" attr.type=\""
           << k.type << "\"/>\n";
    os << "  <graph id=\"G\" edgedefault=\"directed\">\n";
    data(os, "    ", "level", g.level == GraphLevel::Fine ? "fine" : "cell");

    std::set<std::string> written;
    if (options.nested)
        for (const auto& b : boundaries) write_boundary(os, g, b, "    ", written);
    for (const auto& n : g.nodes)
        if (!written.count(n.id)) write_node(os, g, n, "    ");

    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto& e = g.edges[i];
        os << "    <edge id=\"e" << i << "\" source=\"" << xml::escape(g.nodes[static_cast<std::size_t>(e.from)].id)
           << "\" target=\"" << xml::escape(g.nodes[static_cast<std::size_t>(e.to)].id) << "\">\n";
        data(os, "      ", "edgeKind", to_string(e.kind));
        if (e.ordinal >= 0) data(os, "      ", "ordinal", std::to_string(e.ordinal));
        os << "    </edge>\n";
    }
    os << "  </graph>\n</graphml>\n";
    return os.str();
}

void export_graphml(const SpreadsheetGraph& g, const std::filesystem::path& path,
                    const std::vector<CellBoundary>& boundaries, const GraphmlOptions& options) {
    const std::string text = to_graphml(g, boundaries, options);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw GraphmlError(path.string() + ": cannot open for writing");
    f << text;
    if (!f) throw GraphmlError(path.string() + ": write failed");
}

GraphmlDocument from_graphml(std::string_view text) {
    std::unique_ptr<xml::Element> root;
    try {
        root = xml::parse(text);
    } catch (const xml::XmlError& e) {
        throw GraphmlError(e.what());
    }
    if (root->name != "graphml") throw GraphmlError("not a GraphML document");
    const auto* graph = root->child("graph");
    if (!graph) throw GraphmlError("GraphML document has no <graph>");
    Reader r;
    const auto gd = data_of(*graph);
    r.doc.graph.level = gd.count("level") && gd.at("level") == "fine" ? GraphLevel::Fine : GraphLevel::Cell;
    r.read_graph(*graph, nullptr);
    for (const auto& [idx, owner] : r.owners) {
        const int o = r.doc.graph.find(owner);
        if (o < 0) throw GraphmlError("owner '" + owner + "' is not a node");
        r.doc.graph.nodes[static_cast<std::size_t>(idx)].owner = o;
    }
    return std::move(r.doc);
}

GraphmlDocument import_graphml(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw GraphmlError(path.string() + ": cannot open");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_graphml(ss.str());
}

std::vector<std::string> validate_graphml(std::string_view text) {
    Validator v;
    try {
        auto root = xml::parse(text);
        v.run(*root);
    } catch (const xml::XmlError& e) {
        v.err(e.what());
    }
    return v.errors;
}

std::string graph_difference(const SpreadsheetGraph& a, const SpreadsheetGraph& b) {
    if (a.nodes.size() != b.nodes.size())
        return "node count " + std::to_string(a.nodes.size()) + " vs " + std::to_string(b.nodes.size());
    auto owner_id = [](const SpreadsheetGraph& g, const GraphNode& n) {
        return n.owner >= 0 ? g.nodes[static_cast<std::size_t>(n.owner)].id : std::string();
    };
    for (const auto& n : a.nodes) {
        const int j = b.find(n.id);
        if (j < 0) return "node '" + n.id + "' missing";
        GraphNode m = b.nodes[static_cast<std::size_t>(j)];
        if (owner_id(a, n) != owner_id(b, m)) return "node '" + n.id + "' owner differs";
        m.owner = n.owner;
        if (!(m == n)) return "node '" + n.id + "' attributes differ";
    }
    using E = std::tuple<std::string, std::string, int, int>;
    auto edge_set = [](const SpreadsheetGraph& g) {
        std::vector<E> out;
        for (const auto& e : g.edges)
            out.emplace_back(g.nodes[static_cast<std::size_t>(e.from)].id, g.nodes[static_cast<std::size_t>(e.to)].id,
                             static_cast<int>(e.kind), e.ordinal);
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto ea = edge_set(a), eb = edge_set(b);
    if (ea.size() != eb.size()) return "edge count " + std::to_string(ea.size()) + " vs " + std::to_string(eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i)
        if (ea[i] != eb[i]) return "edge " + std::get<0>(ea[i]) + " -> " + std::get<1>(ea[i]) + " differs";
    return {};
}

}  // namespace cellscope::graph
