#include <doctest.h>

#include "layout/layout.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

using namespace cellscope;
using namespace cellscope::layout;

namespace {

const std::string kFixtures = CELLSCOPE_FIXTURES;

Workbook agents() { return load_workbook(kFixtures + "/agents.json").workbook; }

Workbook cells(const std::vector<std::pair<std::string, std::string>>& entries, const std::string& sheet = "Sheet1") {
    Workbook wb;
    for (const auto& [ref, text] : entries) {
        auto r = formula::parse_region(ref);
        CellAddress a{sheet, r->first.row, r->first.col};
        if (!text.empty() && text[0] == '=')
            wb.set_cell(Cell{a, Blank{}, text.substr(1)});
        else
            wb.set_cell(Cell{a, std::strtod(text.c_str(), nullptr), std::nullopt});
    }
    return wb;
}

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Vec2 at(const LayoutState& st, const std::string& id) {
    const int i = st.find(id);
    REQUIRE(i >= 0);
    return st.positions[i];
}

Vec2 anchor(const LayoutState& st, const std::string& id) {
    const int i = st.find(id);
    REQUIRE(i >= 0);
    return st.anchors[i];
}

// Straightforward transcription of one tick, used to check the optimized one.
std::vector<Vec2> reference_tick(const LayoutState& st) {
    const std::size_t n = st.size();
    const auto& p = st.positions;
    const auto& w = st.weights;
    const double eps = 1e-4 * st.scale;
    std::vector<double> mass(n, 1.0);
    for (const auto& [a, b] : st.edges) {
        mass[a] += 1;
        mass[b] += 1;
    }
    std::vector<Vec2> f(n);
    for (const auto& [a, b] : st.edges) {
        f[a].x += w.spring * (p[b].x - p[a].x);
        f[a].y += w.spring * (p[b].y - p[a].y);
        f[b].x += w.spring * (p[a].x - p[b].x);
        f[b].y += w.spring * (p[a].y - p[b].y);
    }
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
            if (u == v) continue;
            const double d = dist(p[u], p[v]);
            if (d == 0) continue;
            const double mag = w.repulsion * mass[u] * mass[v] / std::max(d, eps);
            f[u].x += mag * (p[u].x - p[v].x) / d;
            f[u].y += mag * (p[u].y - p[v].y) / d;
        }
    auto clip = [&](Vec2 d) {
        const double len = std::hypot(d.x, d.y);
        return len > st.max_displacement ? Vec2{d.x * st.max_displacement / len, d.y * st.max_displacement / len} : d;
    };
    std::vector<Vec2> out(n);
    for (std::size_t u = 0; u < n; ++u) {
        const Vec2 d = clip({st.speed * f[u].x, st.speed * f[u].y});
        Vec2 q{p[u].x + d.x, p[u].y + d.y};
        const double pull = st.speed * w.gravity * mass[u];
        const double to_anchor = dist(q, st.anchors[u]);
        if (to_anchor <= pull)
            q = st.anchors[u];
        else
            q = {q.x + (st.anchors[u].x - q.x) * pull / to_anchor, q.y + (st.anchors[u].y - q.y) * pull / to_anchor};
        const Vec2 total = clip({q.x - p[u].x, q.y - p[u].y});
        out[u] = {p[u].x + total.x, p[u].y + total.y};
    }
    return out;
}

}  // namespace

TEST_CASE("anchors follow the grid") {
    const auto wb = agents();
    const auto g = graph::build_cell_graph(wb);
    const auto st = init_layout(g);

    const Vec2 b3 = anchor(st, "Sheet1!R3C2");
    CHECK(b3.x == 20);
    CHECK(b3.y == 30);
    const Vec2 c3 = anchor(st, "Sheet1!R3C3");
    const Vec2 range = anchor(st, "range:Sheet1!R3C3:R5C3");
    CHECK(range == c3);
    CHECK(st.tick == 0);
    for (std::size_t i = 0; i < st.size(); ++i) {
        CHECK(std::isfinite(st.positions[i].x));
        CHECK(dist(st.positions[i], st.anchors[i]) <= 0.25 * 10 * std::sqrt(2.0) + 1e-12);
    }

    SUBCASE("fine graph nodes inherit their cell's anchor") {
        const auto fg = graph::build_fine_graph(wb, 1);
        const auto fs = init_layout(fg);
        for (std::size_t i = 0; i < fg.nodes.size(); ++i)
            if (fg.nodes[i].is_ast()) CHECK(fs.anchors[i] == fs.anchors[fg.nodes[i].owner]);
    }

    SUBCASE("sheets are placed side by side") {
        Workbook two = cells({{"A1", "1"}, {"C2", "2"}}, "First");
        two.set_cell(Cell{CellAddress{"Second", 1, 1}, Blank{}, std::string("First!A1+1")});
        const auto s = init_layout(graph::build_cell_graph(two));
        // First spans three columns, plus two spacer columns
        CHECK(anchor(s, "Second!R1C1").x == doctest::Approx((3 + 2) * 10 + 10));
        CHECK(anchor(s, "First!R1C1").x == 10);
    }

    SUBCASE("unresolved targets borrow a neighbour's anchor") {
        Workbook w = cells({{"B2", "=Table1[Col]+Missing!A1"}});
        const auto gg = graph::build_cell_graph(w);
        const auto s = init_layout(gg);
        int unplaced = 0;
        for (std::size_t i = 0; i < gg.nodes.size(); ++i)
            if (gg.nodes[i].unresolved && gg.nodes[i].row == 0) {
                CHECK(s.anchors[i] == anchor(s, "Sheet1!R2C2"));
                ++unplaced;
            }
        CHECK(unplaced == 1);
        // a cell on a missing sheet keeps its own grid position, beside Sheet1
        CHECK(anchor(s, "Missing!R1C1").x == doctest::Approx((2 + 2) * 10 + 10));
    }

    SUBCASE("single gravity puts every anchor at the centroid") {
        LayoutOptions o;
        o.mode = AnchorMode::SingleGravity;
        const auto s = init_layout(g, o);
        Vec2 c;
        for (const auto& a : st.anchors) {
            c.x += a.x / st.size();
            c.y += a.y / st.size();
        }
        for (const auto& a : s.anchors) {
            CHECK(a.x == doctest::Approx(c.x));
            CHECK(a.y == doctest::Approx(c.y));
        }
    }
}

TEST_CASE("layout argument errors") {
    graph::SpreadsheetGraph empty;
    CHECK_THROWS_AS(init_layout(empty), LayoutError);
    const auto g = graph::build_cell_graph(agents());
    LayoutOptions o;
    o.weights.gravity = -1;
    CHECK_THROWS_AS(init_layout(g, o), LayoutError);
    o.weights.gravity = NAN;
    CHECK_THROWS_AS(init_layout(g, o), LayoutError);
    o = {};
    o.speed = 0;
    CHECK_THROWS_AS(init_layout(g, o), LayoutError);
    SweepOptions so;
    so.decades = -1;
    CHECK_THROWS_AS(gravity_sweep(g, so), LayoutError);
}

TEST_CASE("a single node stays on its anchor") {
    const auto g = graph::build_cell_graph(cells({{"D4", "7"}}));
    REQUIRE(g.nodes.size() == 1);
    LayoutOptions o;
    o.jitter = 0;
    auto st = init_layout(g, o);
    for (int t = 0; t < 50; ++t) {
        CHECK(st.positions[0] == st.anchors[0]);
        step(st);
    }
    o.jitter = 0.25;
    auto js = init_layout(g, o);
    run(js, 100);
    CHECK(js.positions[0] == js.anchors[0]);
}

TEST_CASE("one tick matches the force definitions") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto wb = testing::random_workbook(rng, 20);
        const auto g = trial % 2 ? graph::build_fine_graph(wb, 1) : graph::build_cell_graph(wb);
        if (g.nodes.empty()) continue;
        LayoutOptions o;
        o.seed = trial;
        o.jitter = 0.5;
        std::uniform_real_distribution<double> u(0.0, 2.0);
        o.weights = {u(rng), u(rng), trial % 3 ? u(rng) : 0.0};
        auto st = init_layout(g, o);
        step(st, trial % 5);
        const auto expected = reference_tick(st);
        step(st);
        for (std::size_t i = 0; i < st.size(); ++i) {
            CHECK(st.positions[i].x == doctest::Approx(expected[i].x).epsilon(1e-9));
            CHECK(st.positions[i].y == doctest::Approx(expected[i].y).epsilon(1e-9));
        }
    }
}

TEST_CASE("attraction and repulsion in isolation") {
    SUBCASE("two connected nodes approach") {
        auto st = init_layout(graph::build_cell_graph(cells({{"A1", "1"}, {"E9", "=A1"}})));
        st.weights = {1, 0, 0};
        double d = dist(st.positions[0], st.positions[1]);
        for (int t = 0; t < 200; ++t) {
            step(st);
            const double next = dist(st.positions[0], st.positions[1]);
            CHECK(next < d);
            d = next;
        }
    }
    SUBCASE("two disconnected nodes separate") {
        auto st = init_layout(graph::build_cell_graph(cells({{"A1", "1"}, {"A2", "2"}})));
        st.weights = {0, 1, 0};
        double d = dist(st.positions[0], st.positions[1]);
        for (int t = 0; t < 200; ++t) {
            step(st);
            const double next = dist(st.positions[0], st.positions[1]);
            CHECK(next > d);
            d = next;
        }
    }
    SUBCASE("coincident nodes stay finite") {
        LayoutOptions o;
        o.jitter = 0;
        auto st = init_layout(graph::build_fine_graph(cells({{"A1", "=1+2*3"}}), 1), o);
        st.weights.gravity = 0;
        step(st, 20);
        for (const auto& p : st.positions) CHECK((std::isfinite(p.x) && std::isfinite(p.y)));
    }
}

TEST_CASE("high gravity pins every node to its anchor") {
    std::mt19937_64 rng(5);
    std::vector<graph::SpreadsheetGraph> graphs{graph::build_cell_graph(agents()),
                                                graph::build_fine_graph(agents(), 1)};
    for (int i = 0; i < 20; ++i) graphs.push_back(graph::build_fine_graph(testing::random_workbook(rng), 1));
    for (const auto& g : graphs) {
        if (g.nodes.empty()) continue;
        for (bool strong : {false, true}) {
            LayoutOptions o;
            o.strong_gravity = strong;
            o.weights = {1, 1, 1e6};
            auto st = init_layout(g, o);
            const auto r = run(st, 2000);
            CHECK(r.converged);
            CHECK(max_anchor_distance(st) < 0.01 * o.scale);
        }
    }
}

TEST_CASE("translating the anchors translates the layout") {
    const auto g = graph::build_fine_graph(agents(), 1);
    for (const Vec2 t : {Vec2{37.5, -12.25}, Vec2{-1000, 250}}) {
        auto a = init_layout(g);
        auto b = a;
        for (std::size_t i = 0; i < b.size(); ++i) {
            b.anchors[i] = {b.anchors[i].x + t.x, b.anchors[i].y + t.y};
            b.positions[i] = {b.positions[i].x + t.x, b.positions[i].y + t.y};
        }
        a.weights.gravity = b.weights.gravity = 1;
        run(a, 3000);
        run(b, 3000);
        double worst = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            worst = std::max(worst, dist({a.positions[i].x + t.x, a.positions[i].y + t.y}, b.positions[i]));
        CHECK(worst < 1e-6 * a.scale);
    }
}

TEST_CASE("mirror-symmetric graphs lay out symmetrically") {
    // mirror axis at column B
    const auto wb = cells({{"A1", "1"}, {"C1", "2"}, {"A3", "=A1*2"}, {"C3", "=C1*2"}, {"B5", "=A3+C3"}, {"B2", "5"},
                           {"A6", "=B5-B2"}, {"C6", "=B5-B2"}});
    const auto g = graph::build_cell_graph(wb);
    LayoutOptions o;
    o.jitter = 0;
    o.weights = {1, 1, 0.5};
    auto st = init_layout(g, o);
    run(st, 4000);
    const double axis = 2 * o.scale;
    auto mirrored = [&](const std::string& l, const std::string& r) {
        const Vec2 a = at(st, l), b = at(st, r);
        CHECK(std::abs((axis - a.x) - (b.x - axis)) < 1e-6 * o.scale);
        CHECK(std::abs(a.y - b.y) < 1e-6 * o.scale);
    };
    mirrored("Sheet1!R1C1", "Sheet1!R1C3");
    mirrored("Sheet1!R3C1", "Sheet1!R3C3");
    mirrored("Sheet1!R6C1", "Sheet1!R6C3");
    CHECK(std::abs(at(st, "Sheet1!R5C2").x - axis) < 1e-6 * o.scale);
}

TEST_CASE("layout is deterministic") {
    const auto g = graph::build_fine_graph(agents(), 1);
    auto a = init_layout(g), b = init_layout(g);
    const auto sa = step(a, 150), sb = step(b, 150);
    CHECK(sa.positions == sb.positions);
    CHECK(snapshot_json(sa) == snapshot_json(sb));
    LayoutOptions o;
    o.seed = 2;
    CHECK(init_layout(g, o).positions != init_layout(g).positions);
}

TEST_CASE("gravity sweep") {
    for (auto level : {graph::GraphLevel::Cell, graph::GraphLevel::Fine}) {
        const auto g = level == graph::GraphLevel::Cell ? graph::build_cell_graph(agents())
                                                        : graph::build_fine_graph(agents(), 1);
        SweepOptions o;
        const auto s = gravity_sweep(g, o);
        REQUIRE(s.panels.size() == 6);
        for (int k = 0; k < 6; ++k)
            CHECK(s.panels[k].weights.gravity == doctest::Approx(o.layout.weights.gravity * std::pow(10.0, -k)));
        for (int k = 1; k < 6; ++k) {
            CHECK(s.panels[k].tick > s.panels[k - 1].tick);
            CHECK(s.anchor_distance[k] >= s.anchor_distance[k - 1]);
            CHECK(s.panels[k].weights.spring == s.panels[0].weights.spring);
            CHECK(s.panels[k].weights.repulsion == s.panels[0].weights.repulsion);
        }
        CHECK(s.anchor_distance.front() < 0.01 * o.layout.scale);
        CHECK(s.anchor_distance.back() > o.layout.scale);
    }
    SweepOptions zero;
    zero.decades = 0;
    CHECK(gravity_sweep(graph::build_cell_graph(agents()), zero).panels.size() == 1);
}

TEST_CASE("snapshot serialization") {
    const auto g = graph::build_cell_graph(agents());
    auto st = init_layout(g);
    const auto snap = step(st, 3);
    const auto j = nlohmann::json::parse(snapshot_json(snap));
    CHECK(j["v"] == 1);
    CHECK(j["tick"] == 3);
    CHECK(j["weights"]["gravity"] == 100.0);
    REQUIRE(j["positions"].size() == g.nodes.size());
    CHECK(j["positions"][0]["id"] == g.nodes[0].id);
    CHECK(j["positions"][0]["x"].get<double>() == snap.positions[0].x);
    CHECK(j["meanDisplacement"].get<double>() >= 0);

    SweepOptions o;
    o.ticks_per = 20;
    const auto s = gravity_sweep(g, o);
    const std::string svg = render_svg(s.state, s.panels);
    CHECK(svg.rfind("<svg", 0) == 0);
    auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
        return n;
    };
    CHECK(count("<circle") == 6 * g.nodes.size());
    CHECK(count("<line") == 6 * g.edges.size());
    CHECK(count("<g transform") == 6);
}

TEST_CASE("moderate graph runs quickly") {
    const auto g = graph::build_cell_graph(testing::chain_workbook(60));
    auto st = init_layout(g);
    const auto r = run(st, 50);
    CHECK(r.ticks >= 1);
    CHECK(max_anchor_distance(st) < 0.01 * st.scale);
}
