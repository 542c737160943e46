#include "capi.hpp"
#include "serve.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using cli::check;
using cli::take;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kParseThreshold = 2;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text)) throw cli::Failure(CS_ERR_IO, path.string() + ": cannot write");
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_file(out, text);
}

std::uint64_t default_seed() {
    const char* env = std::getenv("CELLSCOPE_SEED");
    if (!env || !*env) return 1;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end || errno || env[0] == '-') throw cli::Failure(CS_ERR_ARGUMENT, std::string("CELLSCOPE_SEED is not an unsigned integer: ") + env);
    return v;
}

bool workbook_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".json" || ext == ".xlsx";
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string input;
    std::string out;
    std::string out_dir;
    std::string csv;
    double max_parse_failure = -1;
    cs_analyze_options opts{};
    bool timing = false;
};

int cmd_analyze(AnalyzeArgs& a) {
    if (!fs::exists(a.input)) throw cli::Failure(CS_ERR_IO, a.input + ": no such file or directory");

    if (!fs::is_directory(a.input)) {
        auto wb = cli::open_workbook(a.input);
        auto r = cli::analyze(wb.get(), &a.opts, fs::path(a.input).filename().string());
        char* js = nullptr;
        check(cs_report_json(r.get(), a.timing, &js));
        emit(a.out, take(js));
        if (!a.csv.empty()) {
            char* row = nullptr;
            check(cs_report_csv_row(r.get(), &row));
            write_file(a.csv, cs_report_csv_header() + take(row));
        }
        cs_summary s{};
        check(cs_report_summary(r.get(), &s));
        if (s.empty) std::cerr << a.input << ": empty workbook (no non-blank cells)\n";
        if (a.max_parse_failure >= 0 && 1.0 - s.parse_rate > a.max_parse_failure) {
            std::cerr << a.input << ": parse failure rate " << 1.0 - s.parse_rate << " above " << a.max_parse_failure
                      << "\n";
            return kParseThreshold;
        }
        return kOk;
    }

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(a.input))
        if (e.is_regular_file() && workbook_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

    std::string csv = cs_report_csv_header();
    int done = 0, unreadable = 0;
    long formulas = 0, parsed = 0;
    double in_pct = 0, vec_pct = 0, tot_pct = 0;
    int counted = 0;
    for (const auto& f : files) {
        const std::string rel = fs::relative(f, a.input).generic_string();
        try {
            auto wb = cli::open_workbook(f.string());
            auto r = cli::analyze(wb.get(), &a.opts, rel);
            char* row = nullptr;
            check(cs_report_csv_row(r.get(), &row));
            csv += take(row);
            if (!a.out_dir.empty()) {
                char* js = nullptr;
                check(cs_report_json(r.get(), a.timing, &js));
                fs::path target = fs::path(a.out_dir) / rel;
                fs::create_directories(target.parent_path());
                target += ".report.json";
                write_file(target, take(js));
            }
            cs_summary s{};
            check(cs_report_summary(r.get(), &s));
            formulas += s.formulas;
            parsed += s.parsed;
            if (!s.empty) {
                in_pct += s.input_pct;
                vec_pct += s.vector_pct;
                tot_pct += s.total_pct;
                ++counted;
            }
            ++done;
        } catch (const cli::Failure& e) {
            if (e.status == CS_ERR_IO) throw;
            std::cerr << "skipped " << rel << ": " << e.what() << "\n";
            ++unreadable;
        }
    }
    if (!a.csv.empty()) write_file(a.csv, csv);
    else if (a.out_dir.empty()) std::cout << csv;

    const double rate = formulas ? static_cast<double>(parsed) / formulas : 1.0;
    std::cerr << "analyzed " << done << " of " << files.size() << " workbooks (" << unreadable << " unreadable); "
              << "formulas parsed " << parsed << "/" << formulas << " (" << rate * 100 << "%)\n";
    if (counted)
        std::cerr << "mean compression over " << counted << " non-empty workbooks: input " << in_pct / counted * 100
                  << "%, vector " << vec_pct / counted * 100 << "%, total " << tot_pct / counted * 100 << "%\n";
    if (files.empty()) {
        std::cerr << a.input << ": no .json or .xlsx workbooks found\n";
        return kError;
    }
    if (a.max_parse_failure >= 0 && 1.0 - rate > a.max_parse_failure) return kParseThreshold;
    return kOk;
}

// ---------------------------------------------------------------- graph

struct GraphArgs {
    std::string input;
    std::string out;
    cs_level level = CS_LEVEL_FINE;
    std::string seed_cell;
    bool nested = false;
    bool json = false;
};

int cmd_graph(const GraphArgs& a) {
    auto wb = cli::open_workbook(a.input);
    auto g = cli::build_graph(wb.get(), a.level, a.seed_cell.empty() ? nullptr : a.seed_cell.c_str());
    if (a.level == CS_LEVEL_FINE) {
        cs_analyze_options o;
        cs_analyze_default_options(&o);
        auto r = cli::analyze(wb.get(), &o, fs::path(a.input).filename().string());
        check(cs_graph_set_boundaries(g.get(), r.get()));
    }
    char* text = nullptr;
    check(a.json ? cs_graph_json(g.get(), &text) : cs_graph_graphml(g.get(), a.nested, &text));
    emit(a.out, take(text));
    return kOk;
}

// ---------------------------------------------------------------- layout

struct LayoutArgs {
    std::string input;
    std::string out_dir;
    cs_level level = CS_LEVEL_FINE;
    int decades = 0;
    int ticks = 500;
    cs_layout_options opts{};
};

int cmd_layout(const LayoutArgs& a) {
    auto wb = cli::open_workbook(a.input);
    auto g = cli::build_graph(wb.get(), a.level);
    if (cs_graph_node_count(g.get()) == 0) throw cli::Failure(CS_ERR_EMPTY, a.input + ": nothing to lay out");
    cs_sweep* raw = nullptr;
    check(cs_sweep_run(g.get(), &a.opts, a.decades, a.ticks, &raw));
    cli::SweepPtr sweep(raw);
    fs::create_directories(a.out_dir);

    nlohmann::ordered_json summary;
    summary["v"] = 1;
    summary["source"] = fs::path(a.input).filename().string();
    summary["nodes"] = cs_graph_node_count(g.get());
    auto& panels = summary["panels"] = nlohmann::ordered_json::array();
    bool monotone = true;
    double prev = -1;
    const std::size_t count = cs_sweep_panel_count(raw);
    for (std::size_t k = 0; k < count; ++k) {
        double gravity = 0, dist = 0;
        long tick = 0;
        int converged = 0;
        check(cs_sweep_panel(raw, k, &gravity, &dist, &tick, &converged));
        char* js = nullptr;
        check(cs_sweep_panel_json(raw, k, &js));
        const std::string stem = "panel-" + std::to_string(k);
        write_file(fs::path(a.out_dir) / (stem + ".json"), take(js));
        char* svg = nullptr;
        check(cs_sweep_svg(raw, k, &svg));
        write_file(fs::path(a.out_dir) / (stem + ".svg"), take(svg));
        if (dist < prev) monotone = false;
        prev = dist;
        panels.push_back({{"panel", k},
                          {"gravity", gravity},
                          {"tick", tick},
                          {"converged", converged != 0},
                          {"meanAnchorDistance", dist}});
        std::cerr << "panel " << k << ": gravity " << gravity << ", tick " << tick << (converged ? " (converged)" : "")
                  << ", mean anchor distance " << dist << "\n";
    }
    summary["anchorDistanceMonotone"] = monotone;
    write_file(fs::path(a.out_dir) / "sweep.json", summary.dump(2) + "\n");
    char* svg = nullptr;
    check(cs_sweep_svg(raw, static_cast<std::size_t>(-1), &svg));
    write_file(fs::path(a.out_dir) / "sweep.svg", take(svg));
    std::cerr << "mean anchor distance " << (monotone ? "is" : "is NOT") << " monotone non-decreasing as gravity falls\n";
    return kOk;
}

void add_level(CLI::App* app, cs_level& level) {
    app->add_option("--level", level, "cell or fine")
        ->transform(CLI::CheckedTransformer(std::map<std::string, cs_level>{{"cell", CS_LEVEL_CELL}, {"fine", CS_LEVEL_FINE}}));
}

void add_weights(CLI::App* app, cs_layout_options& o) {
    app->add_option("--spring", o.weights.spring, "spring weight")->check(CLI::NonNegativeNumber);
    app->add_option("--repulsion", o.weights.repulsion, "repulsion weight")->check(CLI::NonNegativeNumber);
    app->add_option("--gravity", o.weights.gravity, "gravity weight")->check(CLI::NonNegativeNumber);
    app->add_option("--scale", o.scale, "grid spacing")->check(CLI::PositiveNumber);
    app->add_option("--seed", o.seed, "jitter seed (default: CELLSCOPE_SEED or 1)");
    app->add_flag("--strong-gravity", o.strong_gravity, "pull proportional to anchor distance");
    app->add_flag_callback("--single-gravity", [&o] { o.mode = CS_ANCHOR_SINGLE; }, "one shared centre of gravity");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cellscope: spreadsheet dataflow graphs, structure detection and layout"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cs_version());

    AnalyzeArgs an;
    cs_analyze_default_options(&an.opts);
    auto* analyze = app.add_subcommand("analyze", "detect input vectors, vector operations and shared subexpressions");
    analyze->add_option("input", an.input, "workbook (.json/.xlsx) or directory")->required();
    analyze->add_option("-o,--out", an.out, "report JSON (single workbook; default stdout)");
    analyze->add_option("--out-dir", an.out_dir, "per-workbook report JSON (directories)");
    analyze->add_option("--csv", an.csv, "compression CSV, one row per workbook");
    analyze->add_option("--max-parse-failure", an.max_parse_failure, "exit 2 when the failed-formula fraction exceeds this")
        ->check(CLI::Range(0.0, 1.0));
    analyze->add_option("--max-gap", an.opts.max_gap, "blank rows/columns a rectangle may bridge")->check(CLI::NonNegativeNumber);
    analyze->add_option("--stride", an.opts.stride, "lattice step for rectangles")->check(CLI::PositiveNumber);
    analyze->add_flag("--loose", an.opts.loose, "ignore argument order of commutative operators");
    analyze->add_option("--cse-min-nodes", an.opts.cse_min_nodes, "smallest shared subtree")->check(CLI::PositiveNumber);
    analyze->add_option("--threads", an.opts.threads, "parser threads (0: all cores)");
    analyze->add_flag("--timing", an.timing, "include wall-clock seconds in the report");

    GraphArgs gr;
    auto* graph = app.add_subcommand("graph", "export the dataflow graph as GraphML");
    graph->add_option("input", gr.input, "workbook")->required();
    graph->add_option("-o,--out", gr.out, "output file (default stdout)");
    add_level(graph, gr.level);
    graph->add_option("--seed-cell", gr.seed_cell, "restrict a cell-level graph to what this cell reaches");
    graph->add_flag("--nested", gr.nested, "write boundaries as nested graphs");
    graph->add_flag("--json", gr.json, "JSON topology instead of GraphML");

    LayoutArgs la;
    cs_layout_default_options(&la.opts);
    auto* layout = app.add_subcommand("layout", "force-directed layout snapshots and SVG panels");
    layout->add_option("input", la.input, "workbook")->required();
    layout->add_option("-o,--out", la.out_dir, "output directory")->required();
    add_level(layout, la.level);
    layout->add_option("--gravity-sweep", la.decades, "orders of magnitude to sweep gravity down (panels = decades + 1)")
        ->check(CLI::NonNegativeNumber);
    layout->add_option("--ticks", la.ticks, "tick budget per panel")->check(CLI::NonNegativeNumber);
    add_weights(layout, la.opts);

    cli::ServeOptions sv;
    cs_layout_default_options(&sv.layout);
    sv.layout.weights.gravity = 1;
    auto* serve = app.add_subcommand("serve", "live layout session: GET /graph, WebSocket /session");
    serve->add_option("input", sv.input, "workbook")->required();
    serve->add_option("--port", sv.port, "TCP port (0: any free port)");
    serve->add_option("--host", sv.host, "bind address");
    add_level(serve, sv.level);
    serve->add_option("--fps", sv.fps, "frame rate cap")->check(CLI::PositiveNumber);
    serve->add_option("--ticks-per-frame", sv.ticks_per_frame, "layout ticks per frame")->check(CLI::PositiveNumber);
    add_weights(serve, sv.layout);

    try {
        const std::uint64_t seed = default_seed();
        la.opts.seed = seed;
        sv.layout.seed = seed;
        app.parse(argc, argv);

        if (*analyze) return cmd_analyze(an);
        if (*graph) return cmd_graph(gr);
        if (*layout) return cmd_layout(la);
        if (*serve) return cli::serve(sv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kError;
    } catch (const cli::Failure& e) {
        std::cerr << "cellscope: " << e.what() << "\n";
        return kError;
    } catch (const std::exception& e) {
        std::cerr << "cellscope: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
