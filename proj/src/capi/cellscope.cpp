#include "cellscope/cellscope.h"

#include "detect/detect.hpp"
#include "graph/graphml.hpp"
#include "layout/layout.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

using namespace cellscope;

struct cs_workbook {
    Workbook wb;
    IngestReport report;
};

struct cs_graph {
    std::shared_ptr<graph::SpreadsheetGraph> g;
    std::vector<graph::CellBoundary> boundaries;
};

struct cs_report {
    detect::AnalysisReport r;
    std::shared_ptr<graph::SpreadsheetGraph> fine;
};

struct cs_layout {
    std::shared_ptr<const graph::SpreadsheetGraph> g;
    layout::LayoutOptions opts;
    layout::LayoutState st;
    std::vector<layout::Vec2> initial;
};

struct cs_sweep {
    layout::Sweep s;
};

namespace {

thread_local std::string last_error;

cs_status fail(cs_status s, const std::string& msg) {
    last_error = msg;
    return s;
}

template <class F>
cs_status guard(F&& f) {
    try {
        last_error.clear();
        return f();
    } catch (const formula::FormulaError& e) {
        return fail(CS_ERR_PARSE, e.category() + ": " + e.what());
    } catch (const graph::GraphmlError& e) {
        return fail(CS_ERR_FORMAT, e.what());
    } catch (const WorkbookError& e) {
        return fail(CS_ERR_FORMAT, e.what());
    } catch (const layout::LayoutError& e) {
        return fail(CS_ERR_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(CS_ERR_RANGE, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(CS_ERR_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(CS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CS_ERR_INTERNAL, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.data(), s.size() + 1);
    return p;
}

cs_status put(char** out, const std::string& s) {
    if (!out) return fail(CS_ERR_ARGUMENT, "null output pointer");
    *out = dup(s);
    return CS_OK;
}

layout::LayoutOptions to_cpp(const cs_layout_options* o) {
    layout::LayoutOptions l;
    if (!o) return l;
    l.mode = o->mode == CS_ANCHOR_SINGLE ? layout::AnchorMode::SingleGravity : layout::AnchorMode::Grid;
    l.scale = o->scale;
    l.seed = o->seed;
    l.jitter = o->jitter;
    l.speed = o->speed;
    l.max_displacement = o->max_displacement;
    l.strong_gravity = o->strong_gravity != 0;
    l.weights = {o->weights.spring, o->weights.repulsion, o->weights.gravity};
    return l;
}

bool valid_weight(double v) { return v >= 0 && std::isfinite(v); }

cs_status copy_xy(const std::vector<layout::Vec2>& v, double* xy, size_t count) {
    if (!xy) return fail(CS_ERR_ARGUMENT, "null buffer");
    if (count < v.size()) return fail(CS_ERR_RANGE, "buffer holds fewer points than the layout has nodes");
    for (std::size_t i = 0; i < v.size(); ++i) {
        xy[2 * i] = v[i].x;
        xy[2 * i + 1] = v[i].y;
    }
    return CS_OK;
}

}  // namespace

extern "C" {

int cs_abi_version(void) { return CS_ABI_VERSION; }

const char* cs_version(void) { return "0.1.0"; }

const char* cs_status_name(cs_status s) {
    switch (s) {
        case CS_OK: return "ok";
        case CS_ERR_ARGUMENT: return "argument";
        case CS_ERR_IO: return "io";
        case CS_ERR_FORMAT: return "format";
        case CS_ERR_PARSE: return "parse";
        case CS_ERR_EMPTY: return "empty";
        case CS_ERR_RANGE: return "range";
        case CS_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* cs_last_error(void) { return last_error.c_str(); }

void cs_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------- workbooks

cs_status cs_workbook_open(const char* path, cs_workbook** out) {
    return guard([&] {
        if (!path || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        std::error_code ec;
        if (!std::filesystem::is_regular_file(path, ec)) return fail(CS_ERR_IO, std::string(path) + ": not a readable file");
        if (!std::ifstream(path)) return fail(CS_ERR_IO, std::string(path) + ": cannot open");
        auto loaded = load_workbook(path);
        *out = new cs_workbook{std::move(loaded.workbook), std::move(loaded.report)};
        return CS_OK;
    });
}

cs_status cs_workbook_from_json(const char* text, size_t len, cs_workbook** out) {
    return guard([&] {
        if (!text || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        auto loaded = read_interchange_json(std::string_view(text, len));
        *out = new cs_workbook{std::move(loaded.workbook), std::move(loaded.report)};
        return CS_OK;
    });
}

void cs_workbook_free(cs_workbook* wb) { delete wb; }

cs_status cs_workbook_counts(const cs_workbook* wb, int* sheets, int* non_blank, int* formulas) {
    return guard([&] {
        if (!wb) return fail(CS_ERR_ARGUMENT, "null workbook");
        if (sheets) *sheets = static_cast<int>(wb->wb.sheets().size());
        if (non_blank) *non_blank = static_cast<int>(non_blank_count(wb->wb));
        if (formulas) {
            int n = 0;
            for (const auto& s : wb->wb.sheets())
                for (const auto& [key, c] : s.cells) n += c.formula.has_value();
            *formulas = n;
        }
        return CS_OK;
    });
}

cs_status cs_workbook_issues_json(const cs_workbook* wb, char** out) {
    return guard([&] {
        if (!wb) return fail(CS_ERR_ARGUMENT, "null workbook");
        return put(out, ingest_report_json(wb->report));
    });
}

// ---------------------------------------------------------------- formulas

cs_status cs_formula_sexpr(const char* f, char** out) {
    return guard([&] {
        if (!f) return fail(CS_ERR_ARGUMENT, "null formula");
        return put(out, formula::to_sexpr(formula::parse_ast(f)));
    });
}

cs_status cs_formula_print(const char* f, char** out) {
    return guard([&] {
        if (!f) return fail(CS_ERR_ARGUMENT, "null formula");
        return put(out, formula::to_formula(formula::parse_ast(f)));
    });
}

// ---------------------------------------------------------------- graphs

cs_status cs_graph_build(const cs_workbook* wb, cs_level level, const char* seed_cell, unsigned threads,
                         cs_graph** out) {
    return guard([&] {
        if (!wb || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        auto g = std::make_shared<graph::SpreadsheetGraph>();
        if (level == CS_LEVEL_FINE) {
            if (seed_cell) return fail(CS_ERR_ARGUMENT, "seed cells apply to cell-level graphs only");
            *g = graph::build_fine_graph(wb->wb, threads);
        } else if (level == CS_LEVEL_CELL) {
            std::optional<CellAddress> seed;
            if (seed_cell) {
                auto r = formula::parse_region(seed_cell);
                if (!r || r->kind != formula::RefKind::Cell)
                    return fail(CS_ERR_ARGUMENT, std::string("not a cell reference: ") + seed_cell);
                std::string sheet = r->sheet;
                if (sheet.empty()) {
                    if (wb->wb.sheets().empty()) return fail(CS_ERR_ARGUMENT, "workbook has no sheets");
                    sheet = wb->wb.sheets().front().name;
                } else if (const Sheet* s = wb->wb.sheet(sheet)) {
                    sheet = s->name;
                } else {
                    return fail(CS_ERR_ARGUMENT, "no sheet named " + sheet);
                }
                seed = CellAddress{sheet, r->first.row, r->first.col};
            }
            *g = graph::build_cell_graph(wb->wb, seed);
        } else {
            return fail(CS_ERR_ARGUMENT, "unknown graph level");
        }
        *out = new cs_graph{std::move(g), {}};
        return CS_OK;
    });
}

void cs_graph_free(cs_graph* g) { delete g; }

size_t cs_graph_node_count(const cs_graph* g) { return g ? g->g->nodes.size() : 0; }

size_t cs_graph_edge_count(const cs_graph* g) { return g ? g->g->edges.size() : 0; }

cs_status cs_graph_node_id(const cs_graph* g, size_t index, char** out) {
    return guard([&] {
        if (!g) return fail(CS_ERR_ARGUMENT, "null graph");
        if (index >= g->g->nodes.size()) return fail(CS_ERR_RANGE, "node index out of range");
        return put(out, g->g->nodes[index].id);
    });
}

cs_status cs_graph_set_boundaries(cs_graph* g, const cs_report* r) {
    return guard([&] {
        if (!g || !r) return fail(CS_ERR_ARGUMENT, "null argument");
        auto b = detect::detected_boundaries(*g->g, r->r);
        // copy-on-write: layouts may share the graph
        auto copy = std::make_shared<graph::SpreadsheetGraph>(*g->g);
        graph::assign_boundaries(*copy, b);
        g->g = std::move(copy);
        g->boundaries = std::move(b);
        return CS_OK;
    });
}

cs_status cs_graph_graphml(const cs_graph* g, int nested, char** out) {
    return guard([&] {
        if (!g) return fail(CS_ERR_ARGUMENT, "null graph");
        return put(out, graph::to_graphml(*g->g, g->boundaries, graph::GraphmlOptions{nested != 0}));
    });
}

cs_status cs_graph_write_graphml(const cs_graph* g, const char* path, int nested) {
    return guard([&] {
        if (!g || !path) return fail(CS_ERR_ARGUMENT, "null argument");
        std::ofstream f(path, std::ios::binary);
        if (!f) return fail(CS_ERR_IO, std::string(path) + ": cannot write");
        f << graph::to_graphml(*g->g, g->boundaries, graph::GraphmlOptions{nested != 0});
        if (!f) return fail(CS_ERR_IO, std::string(path) + ": write failed");
        return CS_OK;
    });
}

cs_status cs_graph_json(const cs_graph* g, char** out) {
    return guard([&] {
        if (!g) return fail(CS_ERR_ARGUMENT, "null graph");
        return put(out, graph::to_json(*g->g, g->boundaries));
    });
}

// ---------------------------------------------------------------- detection

void cs_analyze_default_options(cs_analyze_options* o) {
    if (!o) return;
    const detect::AnalyzeOptions d;
    *o = cs_analyze_options{d.detect.max_gap, d.detect.stride, d.detect.loose ? 1 : 0, d.cse_min_nodes, d.threads};
}

cs_status cs_analyze(const cs_workbook* wb, const cs_analyze_options* o, const char* source, cs_report** out) {
    return guard([&] {
        if (!wb || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        detect::AnalyzeOptions a;
        if (o) {
            if (o->max_gap < 0 || o->stride < 1 || o->cse_min_nodes < 1)
                return fail(CS_ERR_ARGUMENT, "max_gap >= 0, stride >= 1 and cse_min_nodes >= 1 required");
            a.detect = {o->max_gap, o->stride, o->loose != 0};
            a.cse_min_nodes = o->cse_min_nodes;
            a.threads = o->threads;
        }
        auto fine = std::make_shared<graph::SpreadsheetGraph>(graph::build_fine_graph(wb->wb, a.threads));
        auto r = detect::analyze(*fine, wb->wb, a, source ? source : "");
        *out = new cs_report{std::move(r), std::move(fine)};
        return CS_OK;
    });
}

void cs_report_free(cs_report* r) { delete r; }

cs_status cs_report_summary(const cs_report* rep, cs_summary* out) {
    return guard([&] {
        if (!rep || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        const auto& r = rep->r;
        const auto& c = r.compression;
        *out = cs_summary{r.parse.formulas,
                          r.parse.parsed,
                          r.parse.parse_rate(),
                          static_cast<int>(r.inputs.vectors.size()),
                          static_cast<int>(r.vector_ops.size()),
                          static_cast<int>(r.inputs.assumptions.size()),
                          c.non_blank,
                          c.input_vector_cells,
                          c.vector_cells,
                          c.input_pct(),
                          c.vector_pct(),
                          c.total_pct(),
                          c.empty ? 1 : 0,
                          r.cse.distinct(),
                          r.cse.mean_size(),
                          r.cse.mean_instances(),
                          r.seconds};
        return CS_OK;
    });
}

cs_status cs_report_json(const cs_report* r, int include_timing, char** out) {
    return guard([&] {
        if (!r) return fail(CS_ERR_ARGUMENT, "null report");
        return put(out, detect::report_json(r->r, include_timing != 0));
    });
}

cs_status cs_report_csv_row(const cs_report* r, char** out) {
    return guard([&] {
        if (!r) return fail(CS_ERR_ARGUMENT, "null report");
        return put(out, detect::csv_row(r->r));
    });
}

const char* cs_report_csv_header(void) {
    static const std::string h = detect::csv_header();
    return h.c_str();
}

// ---------------------------------------------------------------- layout

void cs_layout_default_options(cs_layout_options* o) {
    if (!o) return;
    const layout::LayoutOptions d;
    *o = cs_layout_options{d.mode == layout::AnchorMode::SingleGravity ? CS_ANCHOR_SINGLE : CS_ANCHOR_GRID,
                           d.scale,
                           d.seed,
                           d.jitter,
                           d.speed,
                           d.max_displacement,
                           d.strong_gravity ? 1 : 0,
                           {d.weights.spring, d.weights.repulsion, d.weights.gravity}};
}

cs_status cs_layout_create(const cs_graph* g, const cs_layout_options* o, cs_layout** out) {
    return guard([&] {
        if (!g || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        if (g->g->nodes.empty()) return fail(CS_ERR_EMPTY, "cannot lay out an empty graph");
        auto opts = to_cpp(o);
        auto st = layout::init_layout(*g->g, opts);
        auto initial = st.positions;
        *out = new cs_layout{g->g, opts, std::move(st), std::move(initial)};
        return CS_OK;
    });
}

void cs_layout_free(cs_layout* l) { delete l; }

size_t cs_layout_node_count(const cs_layout* l) { return l ? l->st.size() : 0; }

long cs_layout_tick(const cs_layout* l) { return l ? l->st.tick : 0; }

cs_status cs_layout_step(cs_layout* l, int ticks, double* mean_displacement) {
    return guard([&] {
        if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
        if (ticks < 0) return fail(CS_ERR_ARGUMENT, "negative tick count");
        const auto snap = layout::step(l->st, ticks);
        if (mean_displacement) *mean_displacement = snap.mean_displacement;
        return CS_OK;
    });
}

cs_status cs_layout_run(cs_layout* l, int max_ticks, int* ticks, int* converged) {
    return guard([&] {
        if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
        if (max_ticks < 0) return fail(CS_ERR_ARGUMENT, "negative tick budget");
        const auto r = layout::run(l->st, max_ticks);
        if (ticks) *ticks = r.ticks;
        if (converged) *converged = r.converged ? 1 : 0;
        return CS_OK;
    });
}

cs_status cs_layout_get_weights(const cs_layout* l, cs_weights* out) {
    if (!l || !out) return fail(CS_ERR_ARGUMENT, "null argument");
    *out = cs_weights{l->st.weights.spring, l->st.weights.repulsion, l->st.weights.gravity};
    return CS_OK;
}

cs_status cs_layout_set_weights(cs_layout* l, const cs_weights* w) {
    if (!l || !w) return fail(CS_ERR_ARGUMENT, "null argument");
    if (!valid_weight(w->spring) || !valid_weight(w->repulsion) || !valid_weight(w->gravity))
        return fail(CS_ERR_ARGUMENT, "weights must be finite and non-negative");
    l->st.weights = {w->spring, w->repulsion, w->gravity};
    return CS_OK;
}

cs_status cs_layout_reset(cs_layout* l) {
    if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
    l->st.positions = l->initial;
    return CS_OK;
}

cs_status cs_layout_reseed(cs_layout* l, uint64_t seed) {
    return guard([&] {
        if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
        l->opts.seed = seed;
        auto fresh = layout::init_layout(*l->g, l->opts);
        l->st.positions = fresh.positions;
        l->initial = std::move(fresh.positions);
        return CS_OK;
    });
}

cs_status cs_layout_positions(const cs_layout* l, double* xy, size_t count) {
    if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
    return copy_xy(l->st.positions, xy, count);
}

cs_status cs_layout_anchors(const cs_layout* l, double* xy, size_t count) {
    if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
    return copy_xy(l->st.anchors, xy, count);
}

cs_status cs_layout_anchor_distance(const cs_layout* l, double* mean, double* max) {
    if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
    if (mean) *mean = layout::mean_anchor_distance(l->st);
    if (max) *max = layout::max_anchor_distance(l->st);
    return CS_OK;
}

cs_status cs_layout_snapshot_json(const cs_layout* l, char** out) {
    return guard([&] {
        if (!l) return fail(CS_ERR_ARGUMENT, "null layout");
        return put(out, layout::snapshot_json(layout::snapshot(l->st)));
    });
}

// ---------------------------------------------------------------- sweeps

cs_status cs_sweep_run(const cs_graph* g, const cs_layout_options* o, int decades, int ticks_per, cs_sweep** out) {
    return guard([&] {
        if (!g || !out) return fail(CS_ERR_ARGUMENT, "null argument");
        if (g->g->nodes.empty()) return fail(CS_ERR_EMPTY, "cannot lay out an empty graph");
        if (ticks_per < 0) return fail(CS_ERR_ARGUMENT, "negative tick budget");
        layout::SweepOptions so{decades, ticks_per, to_cpp(o)};
        *out = new cs_sweep{layout::gravity_sweep(*g->g, so)};
        return CS_OK;
    });
}

void cs_sweep_free(cs_sweep* s) { delete s; }

size_t cs_sweep_panel_count(const cs_sweep* s) { return s ? s->s.panels.size() : 0; }

cs_status cs_sweep_panel(const cs_sweep* s, size_t k, double* gravity, double* anchor_distance, long* tick,
                         int* converged) {
    if (!s) return fail(CS_ERR_ARGUMENT, "null sweep");
    if (k >= s->s.panels.size()) return fail(CS_ERR_RANGE, "panel index out of range");
    if (gravity) *gravity = s->s.panels[k].weights.gravity;
    if (anchor_distance) *anchor_distance = s->s.anchor_distance[k];
    if (tick) *tick = s->s.panels[k].tick;
    if (converged) *converged = s->s.converged[k] ? 1 : 0;
    return CS_OK;
}

cs_status cs_sweep_panel_json(const cs_sweep* s, size_t k, char** out) {
    return guard([&] {
        if (!s) return fail(CS_ERR_ARGUMENT, "null sweep");
        if (k >= s->s.panels.size()) return fail(CS_ERR_RANGE, "panel index out of range");
        return put(out, layout::snapshot_json(s->s.panels[k]));
    });
}

cs_status cs_sweep_svg(const cs_sweep* s, size_t k, char** out) {
    return guard([&] {
        if (!s) return fail(CS_ERR_ARGUMENT, "null sweep");
        if (k == static_cast<size_t>(-1)) return put(out, layout::render_svg(s->s.state, s->s.panels));
        if (k >= s->s.panels.size()) return fail(CS_ERR_RANGE, "panel index out of range");
        layout::SvgOptions o;
        o.columns = 1;
        return put(out, layout::render_svg(s->s.state, {s->s.panels[k]}, o));
    });
}

}  // extern "C"
