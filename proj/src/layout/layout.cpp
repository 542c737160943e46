#include "layout/layout.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace cellscope::layout {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

// Uniform in [-1, 1), independent of node order.
Vec2 jitter_of(std::uint64_t seed, const std::string& id) {
    const std::uint64_t a = splitmix(seed ^ fnv(id));
    const std::uint64_t b = splitmix(a);
    const double k = 1.0 / 9007199254740992.0;
    return {static_cast<double>(a >> 11) * k * 2 - 1, static_cast<double>(b >> 11) * k * 2 - 1};
}

void clip(double& dx, double& dy, double cap) {
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d > cap) {
        dx *= cap / d;
        dy *= cap / d;
    }
}

}  // namespace

int LayoutState::find(const std::string& id) const {
    for (std::size_t i = 0; i < ids->size(); ++i)
        if ((*ids)[i] == id) return static_cast<int>(i);
    return -1;
}

LayoutState init_layout(const graph::SpreadsheetGraph& g, const LayoutOptions& o) {
    if (g.nodes.empty()) throw LayoutError("cannot lay out an empty graph");
    if (!(o.scale > 0) || !(o.speed > 0) || !(o.max_displacement > 0))
        throw LayoutError("scale, speed and max displacement must be positive");
    const Weights& w = o.weights;
    for (double v : {w.spring, w.repulsion, w.gravity})
        if (!(v >= 0) || !std::isfinite(v)) throw LayoutError("weights must be finite and non-negative");

    LayoutState st;
    const std::size_t n = g.nodes.size();
    auto ids = std::make_shared<std::vector<std::string>>();
    ids->reserve(n);
    for (const auto& node : g.nodes) ids->push_back(node.id);
    st.ids = std::move(ids);
    st.weights = w;
    st.speed = o.speed;
    st.max_displacement = o.max_displacement;
    st.scale = o.scale;
    st.strong_gravity = o.strong_gravity;

    for (const auto& e : g.edges) st.edges.emplace_back(e.from, e.to);
    const auto deg = g.degree();
    st.mass.resize(n);
    for (std::size_t i = 0; i < n; ++i) st.mass[i] = deg[i] + 1.0;

    // sheets side by side, in order of first appearance, two empty columns apart
    std::map<std::string, int> sheet_index;
    std::vector<int> max_col;
    st.sheet.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = g.nodes[i];
        if (node.row <= 0 || node.col <= 0) continue;
        auto [it, fresh] = sheet_index.emplace(node.sheet, static_cast<int>(st.sheets.size()));
        if (fresh) {
            st.sheets.push_back(node.sheet);
            max_col.push_back(0);
        }
        st.sheet[i] = it->second;
        max_col[it->second] = std::max(max_col[it->second], node.col);
    }
    std::vector<double> offset(st.sheets.size(), 0.0);
    for (std::size_t s = 1; s < offset.size(); ++s) offset[s] = offset[s - 1] + (max_col[s - 1] + 2) * o.scale;

    st.anchors.assign(n, Vec2{});
    std::vector<bool> placed(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (st.sheet[i] < 0) continue;
        st.anchors[i] = {offset[st.sheet[i]] + g.nodes[i].col * o.scale, g.nodes[i].row * o.scale};
        placed[i] = true;
    }
    // nodes without a location (unresolved targets) borrow a neighbour's anchor
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& [a, b] : st.edges) {
            if (placed[a] == placed[b]) continue;
            const int to = placed[a] ? b : a, from = placed[a] ? a : b;
            st.anchors[to] = st.anchors[from];
            st.sheet[to] = st.sheet[from];
            placed[to] = true;
            changed = true;
        }
    }

    double radius = o.jitter * o.scale;
    if (o.mode == AnchorMode::SingleGravity) {
        Vec2 c;
        for (const auto& a : st.anchors) {
            c.x += a.x;
            c.y += a.y;
        }
        c.x /= n;
        c.y /= n;
        st.anchors.assign(n, c);
        radius *= std::sqrt(static_cast<double>(n));
    }

    st.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 j = jitter_of(o.seed, (*st.ids)[i]);
        st.positions[i] = {st.anchors[i].x + radius * j.x, st.anchors[i].y + radius * j.y};
    }
    return st;
}

namespace {

// One synchronous tick; returns the mean displacement.
double tick(LayoutState& st, std::vector<double>& fx, std::vector<double>& fy) {
    const std::size_t n = st.size();
    const Weights& w = st.weights;
    fx.assign(n, 0.0);
    fy.assign(n, 0.0);
    const auto& p = st.positions;

    if (w.spring > 0)
        for (const auto& [a, b] : st.edges) {
            const double dx = p[b].x - p[a].x, dy = p[b].y - p[a].y;
            fx[a] += w.spring * dx;
            fy[a] += w.spring * dy;
            fx[b] -= w.spring * dx;
            fy[b] -= w.spring * dy;
        }

    if (w.repulsion > 0) {
        const double eps = 1e-4 * st.scale, eps2 = eps * eps;
        std::vector<double> x(n), y(n), m(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = p[i].x;
            y[i] = p[i].y;
            m[i] = st.mass[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i], yi = y[i], mi = w.repulsion * st.mass[i];
            double ax = 0, ay = 0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = xi - x[j], dy = yi - y[j];
                const double d2 = dx * dx + dy * dy;
                if (d2 == 0) continue;  // coincident: no direction
                // magnitude m/d along (dx,dy)/d, with d floored at eps
                const double k = mi * m[j] / (d2 >= eps2 ? d2 : eps * std::sqrt(d2));
                ax += k * dx;
                ay += k * dy;
                fx[j] -= k * dx;
                fy[j] -= k * dy;
            }
            fx[i] += ax;
            fy[i] += ay;
        }
    }

    // Gravity is applied as an exact (proximal) step toward the anchor so a
    // strong pull settles on the anchor instead of oscillating around it.
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = st.speed * fx[i], dy = st.speed * fy[i];
        clip(dx, dy, st.max_displacement);
        double qx = p[i].x + dx, qy = p[i].y + dy;
        if (w.gravity > 0) {
            const double pull = st.speed * w.gravity * st.mass[i];
            const double gx = st.anchors[i].x - qx, gy = st.anchors[i].y - qy;
            if (st.strong_gravity) {
                qx += gx * pull / (1 + pull);
                qy += gy * pull / (1 + pull);
            } else {
                const double d = std::sqrt(gx * gx + gy * gy);
                if (d <= pull) {
                    qx = st.anchors[i].x;
                    qy = st.anchors[i].y;
                } else {
                    qx += gx * pull / d;
                    qy += gy * pull / d;
                }
            }
        }
        dx = qx - p[i].x;
        dy = qy - p[i].y;
        clip(dx, dy, st.max_displacement);
        total += std::sqrt(dx * dx + dy * dy);
        fx[i] = dx;
        fy[i] = dy;
    }
    for (std::size_t i = 0; i < n; ++i) {
        st.positions[i].x += fx[i];
        st.positions[i].y += fy[i];
    }
    ++st.tick;
    return total / n;
}

}  // namespace

LayoutSnapshot snapshot(const LayoutState& st, double mean_displacement) {
    return LayoutSnapshot{st.tick, st.weights, st.ids, st.positions, mean_displacement};
}

LayoutSnapshot step(LayoutState& st, int n) {
    std::vector<double> fx, fy;
    double mean = 0;
    for (int i = 0; i < n; ++i) mean = tick(st, fx, fy);
    return snapshot(st, mean);
}

double convergence_threshold(const LayoutState& st) { return 1e-3 * st.scale; }

RunResult run(LayoutState& st, int max_ticks) {
    std::vector<double> fx, fy;
    RunResult r;
    double mean = 0;
    while (r.ticks < max_ticks) {
        mean = tick(st, fx, fy);
        ++r.ticks;
        if (mean < convergence_threshold(st)) {
            r.converged = true;
            break;
        }
    }
    r.snapshot = snapshot(st, mean);
    return r;
}

double mean_anchor_distance(const LayoutState& st) {
    double s = 0;
    for (std::size_t i = 0; i < st.size(); ++i)
        s += std::hypot(st.positions[i].x - st.anchors[i].x, st.positions[i].y - st.anchors[i].y);
    return st.size() ? s / st.size() : 0.0;
}

double max_anchor_distance(const LayoutState& st) {
    double m = 0;
    for (std::size_t i = 0; i < st.size(); ++i)
        m = std::max(m, std::hypot(st.positions[i].x - st.anchors[i].x, st.positions[i].y - st.anchors[i].y));
    return m;
}

Sweep gravity_sweep(const graph::SpreadsheetGraph& g, const SweepOptions& o) {
    if (o.decades < 0) throw LayoutError("decades must be non-negative");
    Sweep s{init_layout(g, o.layout), {}, {}, {}};
    const double base = o.layout.weights.gravity;
    for (int k = 0; k <= o.decades; ++k) {
        s.state.weights.gravity = base * std::pow(10.0, -k);
        RunResult r = run(s.state, o.ticks_per);
        s.panels.push_back(std::move(r.snapshot));
        s.anchor_distance.push_back(mean_anchor_distance(s.state));
        s.converged.push_back(r.converged);
    }
    return s;
}

std::string snapshot_json(const LayoutSnapshot& s) {
    nlohmann::ordered_json j;
    j["v"] = 1;
    j["tick"] = s.tick;
    j["weights"] = {{"spring", s.weights.spring}, {"repulsion", s.weights.repulsion}, {"gravity", s.weights.gravity}};
    j["meanDisplacement"] = s.mean_displacement;
    auto& pos = j["positions"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.positions.size(); ++i)
        pos.push_back({{"id", (*s.ids)[i]}, {"x", s.positions[i].x}, {"y", s.positions[i].y}});
    return j.dump() + "\n";
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string xml_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const LayoutState& st, const std::vector<LayoutSnapshot>& panels, const SvgOptions& o) {
    const int cols = std::max(1, std::min<int>(o.columns, static_cast<int>(std::max<std::size_t>(1, panels.size()))));
    const int rows = static_cast<int>((panels.size() + cols - 1) / cols);
    const double p = o.panel, pad = 12, label = 16;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(cols * p) << "\" height=\""
       << num(std::max(1, rows) * p) << "\">\n";
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const auto& snap = panels[k];
        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        for (const auto& v : snap.positions) {
            x0 = std::min(x0, v.x);
            y0 = std::min(y0, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        }
        const double span = std::max({x1 - x0, y1 - y0, 1e-9});
        const double scale = (p - 2 * pad - label) / span;
        auto X = [&](double x) { return num(pad + (x - x0) * scale); };
        auto Y = [&](double y) { return num(pad + label + (y - y0) * scale); };

        os << "<g transform=\"translate(" << num((k % cols) * p) << "," << num((k / cols) * p) << ")\">\n";
        os << "<rect width=\"" << num(p) << "\" height=\"" << num(p) << "\" fill=\"white\" stroke=\"#ccc\"/>\n";
        os << "<text x=\"" << num(pad) << "\" y=\"" << num(pad + 4) << "\" font-size=\"11\" font-family=\"sans-serif\">"
           << "gravity " << xml_text(num(snap.weights.gravity)) << " tick " << snap.tick << "</text>\n";
        if (o.edges) {
            os << "<g stroke=\"#999\" stroke-width=\"0.5\" stroke-opacity=\"0.6\">\n";
            for (const auto& [a, b] : st.edges)
                os << "<line x1=\"" << X(snap.positions[a].x) << "\" y1=\"" << Y(snap.positions[a].y) << "\" x2=\""
                   << X(snap.positions[b].x) << "\" y2=\"" << Y(snap.positions[b].y) << "\"/>\n";
            os << "</g>\n";
        }
        for (std::size_t i = 0; i < snap.positions.size(); ++i) {
            const int s = st.sheet[i];
            const char* colour = s < 0 ? "#444" : kPalette[s % (sizeof kPalette / sizeof *kPalette)];
            os << "<circle cx=\"" << X(snap.positions[i].x) << "\" cy=\"" << Y(snap.positions[i].y)
               << "\" r=\"2.5\" fill=\"" << colour << "\"><title>" << xml_text((*snap.ids)[i]) << "</title></circle>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace cellscope::layout
