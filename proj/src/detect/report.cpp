#include "detect/detect.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

namespace cellscope::detect {

namespace {

using nlohmann::ordered_json;

ordered_json cells_json(const std::vector<CellAddress>& cells) {
    ordered_json a = ordered_json::array();
    for (const auto& c : cells) a.push_back(to_string(c));
    return a;
}

ordered_json signature_json(const Signature& s) {
    return {{"hash", s.hash}, {"nodeCount", s.node_count}, {"canonicalForm", s.canonical}};
}

ordered_json vector_json(const DetectedVector& v) {
    ordered_json j;
    j["kind"] = v.kind == VectorKind::InputVector ? "input-vector" : "vector-op";
    j["region"] = graph::to_string(v.region);
    j["cells"] = cells_json(v.cells);
    if (v.sig) {
        j["signature"] = signature_json(*v.sig);
        j["constants"] = v.constants;
        j["referencePattern"] = v.reference_pattern;
    }
    return j;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string report_json(const AnalysisReport& r, bool include_timing) {
    ordered_json j;
    j["v"] = 1;
    if (!r.source.empty()) j["source"] = r.source;

    j["inputVectors"] = ordered_json::array();
    for (const auto& v : r.inputs.vectors) j["inputVectors"].push_back(vector_json(v));
    j["vectorOps"] = ordered_json::array();
    for (const auto& v : r.vector_ops) j["vectorOps"].push_back(vector_json(v));
    j["assumptions"] = cells_json(r.inputs.assumptions);

    ordered_json cse;
    cse["minNodes"] = r.cse.min_nodes;
    cse["nestedInstancesCounted"] = r.cse.nested_counted;
    cse["distinctSubtrees"] = r.cse.distinct();
    cse["meanSize"] = r.cse.mean_size();
    cse["meanInstances"] = r.cse.mean_instances();
    cse["groups"] = ordered_json::array();
    for (const auto& g : r.cse.groups) {
        ordered_json gj = signature_json(g.sig);
        gj["instances"] = g.instances.size();
        gj["nodes"] = g.instances;
        cse["groups"].push_back(std::move(gj));
    }
    j["cse"] = std::move(cse);

    const auto& c = r.compression;
    j["compression"] = {{"nonBlank", c.non_blank},
                        {"inputVectorCells", c.input_vector_cells},
                        {"vectorCells", c.vector_cells},
                        {"inputPct", c.input_pct()},
                        {"vectorPct", c.vector_pct()},
                        {"totalPct", c.total_pct()},
                        {"empty", c.empty}};

    ordered_json p;
    p["formulas"] = r.parse.formulas;
    p["parsed"] = r.parse.parsed;
    p["failed"] = r.parse.formulas - r.parse.parsed;
    p["parseRate"] = r.parse.parse_rate();
    p["failureCategories"] = r.parse.failure_categories;
    p["unresolvedCategories"] = r.parse.unresolved_categories;
    p["failures"] = ordered_json::array();
    for (const auto& f : r.parse.failures)
        p["failures"].push_back({{"cell", f.cell}, {"category", f.category}, {"message", f.message}});
    j["parse"] = std::move(p);
    if (include_timing) j["seconds"] = r.seconds;
    return j.dump(2) + "\n";
}

std::string csv_header() {
    return "file,nonBlank,formulas,parsed,parseRate,inputVectors,vectorOps,assumptions,inputVectorCells,vectorCells,"
           "inputPct,vectorPct,totalPct,distinctSubtrees,meanSize,meanInstances\n";
}

std::string csv_row(const AnalysisReport& r) {
    std::ostringstream os;
    const auto& c = r.compression;
    os << csv_field(r.source) << ',' << c.non_blank << ',' << r.parse.formulas << ',' << r.parse.parsed << ','
       << fixed(r.parse.parse_rate()) << ',' << r.inputs.vectors.size() << ',' << r.vector_ops.size() << ','
       << r.inputs.assumptions.size() << ',' << c.input_vector_cells << ',' << c.vector_cells << ','
       << fixed(c.input_pct()) << ',' << fixed(c.vector_pct()) << ',' << fixed(c.total_pct()) << ','
       << r.cse.distinct() << ',' << fixed(r.cse.mean_size()) << ',' << fixed(r.cse.mean_instances()) << '\n';
    return os.str();
}

}  // namespace cellscope::detect
