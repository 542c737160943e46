#pragma once

// Force-directed layout with one gravity anchor per node. Cells are pulled
// toward their grid position, formula nodes toward their owning cell.

#include "graph/graph.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellscope::layout {

struct Vec2 {
    double x = 0;
    double y = 0;
    bool operator==(const Vec2&) const = default;
};

struct Weights {
    double spring = 1.0;
    double repulsion = 1.0;
    double gravity = 100.0;
    bool operator==(const Weights&) const = default;
};

enum class AnchorMode { Grid, SingleGravity };

struct LayoutOptions {
    AnchorMode mode = AnchorMode::Grid;
    double scale = 10.0;  // grid spacing s
    std::uint64_t seed = 1;
    double jitter = 0.25;  // initial offset from the anchor, in units of s
    double speed = 0.02;
    double max_displacement = 10.0;
    bool strong_gravity = false;  // pull proportional to distance
    Weights weights;
};

class LayoutError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LayoutState {
    std::shared_ptr<const std::vector<std::string>> ids;
    std::vector<std::string> sheets;
    std::vector<int> sheet;  // per node, index into sheets or -1
    std::vector<std::pair<int, int>> edges;
    std::vector<double> mass;  // degree + 1
    std::vector<Vec2> anchors;
    std::vector<Vec2> positions;
    Weights weights;
    long tick = 0;
    double speed = 0.02;
    double max_displacement = 10.0;
    double scale = 10.0;
    bool strong_gravity = false;

    std::size_t size() const { return positions.size(); }
    int find(const std::string& id) const;
};

struct LayoutSnapshot {
    long tick = 0;
    Weights weights;
    std::shared_ptr<const std::vector<std::string>> ids;
    std::vector<Vec2> positions;
    double mean_displacement = 0;
};

LayoutState init_layout(const graph::SpreadsheetGraph& g, const LayoutOptions& opts = {});

// Runs n synchronous ticks. The snapshot carries the last tick's mean
// displacement.
LayoutSnapshot step(LayoutState& st, int n = 1);

LayoutSnapshot snapshot(const LayoutState& st, double mean_displacement = 0);

struct RunResult {
    LayoutSnapshot snapshot;
    int ticks = 0;
    bool converged = false;
};

// Steps until the mean displacement drops below 1e-3 * s or the budget runs out.
RunResult run(LayoutState& st, int max_ticks);

double convergence_threshold(const LayoutState& st);
double mean_anchor_distance(const LayoutState& st);
double max_anchor_distance(const LayoutState& st);

struct SweepOptions {
    int decades = 5;
    int ticks_per = 500;
    LayoutOptions layout;  // layout.weights.gravity is the starting weight
};

struct Sweep {
    LayoutState state;
    std::vector<LayoutSnapshot> panels;
    std::vector<double> anchor_distance;  // per panel
    std::vector<bool> converged;
};

// One panel per gravity weight base * 10^-k, k = 0..decades; each panel
// starts from the previous panel's positions.
Sweep gravity_sweep(const graph::SpreadsheetGraph& g, const SweepOptions& opts = {});

std::string snapshot_json(const LayoutSnapshot& s);

struct SvgOptions {
    double panel = 360;  // panel edge in pixels
    int columns = 3;
    bool edges = true;
};

// Panels side by side; nodes coloured by sheet.
std::string render_svg(const LayoutState& st, const std::vector<LayoutSnapshot>& panels, const SvgOptions& opts = {});

}  // namespace cellscope::layout
