#pragma once

// Small RAII layer over the C interface for the command-line tool.

#include "cellscope/cellscope.h"

#include <memory>
#include <stdexcept>
#include <string>

namespace cli {

class Failure : public std::runtime_error {
public:
    Failure(cs_status s, const std::string& what) : std::runtime_error(what), status(s) {}
    cs_status status;
};

inline void check(cs_status s, const std::string& context = {}) {
    if (s == CS_OK) return;
    std::string msg = cs_last_error();
    if (msg.empty()) msg = cs_status_name(s);
    throw Failure(s, context.empty() ? msg : context + ": " + msg);
}

inline std::string take(char* s) {
    std::string out = s ? s : "";
    cs_string_free(s);
    return out;
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using WorkbookPtr = std::unique_ptr<cs_workbook, Deleter<cs_workbook, cs_workbook_free>>;
using GraphPtr = std::unique_ptr<cs_graph, Deleter<cs_graph, cs_graph_free>>;
using ReportPtr = std::unique_ptr<cs_report, Deleter<cs_report, cs_report_free>>;
using LayoutPtr = std::unique_ptr<cs_layout, Deleter<cs_layout, cs_layout_free>>;
using SweepPtr = std::unique_ptr<cs_sweep, Deleter<cs_sweep, cs_sweep_free>>;

inline WorkbookPtr open_workbook(const std::string& path) {
    cs_workbook* wb = nullptr;
    check(cs_workbook_open(path.c_str(), &wb));
    return WorkbookPtr(wb);
}

inline GraphPtr build_graph(const cs_workbook* wb, cs_level level, const char* seed = nullptr) {
    cs_graph* g = nullptr;
    check(cs_graph_build(wb, level, seed, 0, &g));
    return GraphPtr(g);
}

inline ReportPtr analyze(const cs_workbook* wb, const cs_analyze_options* o, const std::string& source) {
    cs_report* r = nullptr;
    check(cs_analyze(wb, o, source.c_str(), &r));
    return ReportPtr(r);
}

}  // namespace cli
