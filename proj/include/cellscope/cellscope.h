#ifndef CELLSCOPE_H
#define CELLSCOPE_H

/* C interface to the cellscope core. Every call returns a cs_status; on
 * failure cs_last_error() describes the error for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * cs_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CS_API __declspec(dllexport)
#else
#define CS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define CS_ABI_VERSION 1

typedef enum cs_status {
    CS_OK = 0,
    CS_ERR_ARGUMENT = 1, /* null handle, bad option value */
    CS_ERR_IO = 2,       /* unreadable or unwritable file */
    CS_ERR_FORMAT = 3,   /* malformed workbook or GraphML */
    CS_ERR_PARSE = 4,    /* formula does not parse */
    CS_ERR_EMPTY = 5,    /* operation needs a non-empty graph */
    CS_ERR_RANGE = 6,    /* index out of range or buffer too small */
    CS_ERR_INTERNAL = 7
} cs_status;

typedef struct cs_workbook cs_workbook;
typedef struct cs_graph cs_graph;
typedef struct cs_report cs_report;
typedef struct cs_layout cs_layout;
typedef struct cs_sweep cs_sweep;

typedef enum cs_level { CS_LEVEL_CELL = 0, CS_LEVEL_FINE = 1 } cs_level;
typedef enum cs_anchor_mode { CS_ANCHOR_GRID = 0, CS_ANCHOR_SINGLE = 1 } cs_anchor_mode;

CS_API int cs_abi_version(void);
CS_API const char* cs_version(void);
CS_API const char* cs_status_name(cs_status s);
CS_API const char* cs_last_error(void);
CS_API void cs_string_free(char* s);

/* ---- workbooks ---- */

/* .json interchange or .xlsx, chosen by extension. */
CS_API cs_status cs_workbook_open(const char* path, cs_workbook** out);
CS_API cs_status cs_workbook_from_json(const char* text, size_t len, cs_workbook** out);
CS_API void cs_workbook_free(cs_workbook* wb);
CS_API cs_status cs_workbook_counts(const cs_workbook* wb, int* sheets, int* non_blank, int* formulas);
/* Ingest issues collected while loading, as JSON. */
CS_API cs_status cs_workbook_issues_json(const cs_workbook* wb, char** out);

/* ---- formulas ---- */

/* Normalized tree as an s-expression; CS_ERR_PARSE with the category in
 * cs_last_error() on failure. */
CS_API cs_status cs_formula_sexpr(const char* formula, char** out);
/* Canonical formula text of the normalized tree. */
CS_API cs_status cs_formula_print(const char* formula, char** out);

/* ---- graphs ---- */

/* seed_cell ("Sheet1!C7") restricts a cell-level graph to what the seed
 * reaches; pass NULL for the whole workbook. threads = 0 picks the hardware
 * concurrency (fine graphs only). */
CS_API cs_status cs_graph_build(const cs_workbook* wb, cs_level level, const char* seed_cell, unsigned threads,
                                cs_graph** out);
CS_API void cs_graph_free(cs_graph* g);
CS_API size_t cs_graph_node_count(const cs_graph* g);
CS_API size_t cs_graph_edge_count(const cs_graph* g);
CS_API cs_status cs_graph_node_id(const cs_graph* g, size_t index, char** out);
/* Attaches the detected vector boundaries of a report (built from the same
 * workbook) so exports carry them. */
CS_API cs_status cs_graph_set_boundaries(cs_graph* g, const cs_report* r);
CS_API cs_status cs_graph_graphml(const cs_graph* g, int nested, char** out);
CS_API cs_status cs_graph_write_graphml(const cs_graph* g, const char* path, int nested);
/* Topology, node metadata and boundaries as JSON. */
CS_API cs_status cs_graph_json(const cs_graph* g, char** out);

/* ---- detection ---- */

typedef struct cs_analyze_options {
    int max_gap;
    int stride;
    int loose;
    int cse_min_nodes;
    unsigned threads;
} cs_analyze_options;

typedef struct cs_summary {
    int formulas;
    int parsed;
    double parse_rate;
    int input_vectors;
    int vector_ops;
    int assumptions;
    int non_blank;
    int input_vector_cells;
    int vector_cells;
    double input_pct;
    double vector_pct;
    double total_pct;
    int empty;
    int cse_groups;
    double cse_mean_size;
    double cse_mean_instances;
    double seconds;
} cs_summary;

CS_API void cs_analyze_default_options(cs_analyze_options* o);
/* source labels the report (usually the file name); may be NULL. */
CS_API cs_status cs_analyze(const cs_workbook* wb, const cs_analyze_options* o, const char* source, cs_report** out);
CS_API void cs_report_free(cs_report* r);
CS_API cs_status cs_report_summary(const cs_report* r, cs_summary* out);
CS_API cs_status cs_report_json(const cs_report* r, int include_timing, char** out);
CS_API cs_status cs_report_csv_row(const cs_report* r, char** out);
CS_API const char* cs_report_csv_header(void);

/* ---- layout ---- */

typedef struct cs_weights {
    double spring;
    double repulsion;
    double gravity;
} cs_weights;

typedef struct cs_layout_options {
    cs_anchor_mode mode;
    double scale;
    uint64_t seed;
    double jitter;
    double speed;
    double max_displacement;
    int strong_gravity;
    cs_weights weights;
} cs_layout_options;

CS_API void cs_layout_default_options(cs_layout_options* o);
CS_API cs_status cs_layout_create(const cs_graph* g, const cs_layout_options* o, cs_layout** out);
CS_API void cs_layout_free(cs_layout* l);
CS_API size_t cs_layout_node_count(const cs_layout* l);
CS_API long cs_layout_tick(const cs_layout* l);
CS_API cs_status cs_layout_step(cs_layout* l, int ticks, double* mean_displacement);
/* Steps until converged or max_ticks; either output may be NULL. */
CS_API cs_status cs_layout_run(cs_layout* l, int max_ticks, int* ticks, int* converged);
CS_API cs_status cs_layout_get_weights(const cs_layout* l, cs_weights* out);
CS_API cs_status cs_layout_set_weights(cs_layout* l, const cs_weights* w);
/* Back to the initial positions; weights and tick count are kept. */
CS_API cs_status cs_layout_reset(cs_layout* l);
/* New jitter from seed around the same anchors. */
CS_API cs_status cs_layout_reseed(cs_layout* l, uint64_t seed);
/* xy receives 2 * count doubles: x0, y0, x1, y1, ... */
CS_API cs_status cs_layout_positions(const cs_layout* l, double* xy, size_t count);
CS_API cs_status cs_layout_anchors(const cs_layout* l, double* xy, size_t count);
CS_API cs_status cs_layout_anchor_distance(const cs_layout* l, double* mean, double* max);
CS_API cs_status cs_layout_snapshot_json(const cs_layout* l, char** out);

/* ---- gravity sweeps ---- */

CS_API cs_status cs_sweep_run(const cs_graph* g, const cs_layout_options* o, int decades, int ticks_per,
                              cs_sweep** out);
CS_API void cs_sweep_free(cs_sweep* s);
CS_API size_t cs_sweep_panel_count(const cs_sweep* s);
CS_API cs_status cs_sweep_panel(const cs_sweep* s, size_t k, double* gravity, double* anchor_distance,
                                long* tick, int* converged);
CS_API cs_status cs_sweep_panel_json(const cs_sweep* s, size_t k, char** out);
/* One panel, or every panel side by side when k is (size_t)-1. */
CS_API cs_status cs_sweep_svg(const cs_sweep* s, size_t k, char** out);

#ifdef __cplusplus
}
#endif

#endif
