#include <doctest.h>

#include "detect/detect.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>
#include <random>

using namespace cellscope;
using namespace cellscope::detect;
using cellscope::formula::AstKind;
using cellscope::formula::AstNode;

namespace {

const std::string kFixtures = CELLSCOPE_FIXTURES;

Workbook agents() { return load_workbook(kFixtures + "/agents.json").workbook; }

Workbook sheet_of(const std::vector<std::pair<std::string, std::string>>& cells) {
    Workbook wb;
    for (const auto& [ref, text] : cells) {
        auto r = formula::parse_region(ref);
        CellAddress a{"Sheet1", r->first.row, r->first.col};
        if (!text.empty() && text[0] == '=')
            wb.set_cell(Cell{a, Blank{}, text.substr(1)});
        else
            wb.set_cell(Cell{a, std::strtod(text.c_str(), nullptr), std::nullopt});
    }
    return wb;
}

std::vector<std::string> regions(const std::vector<DetectedVector>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs) out.push_back(graph::to_string(v.region));
    return out;
}

std::set<std::pair<int, int>> cellset(std::initializer_list<std::pair<int, int>> cells) { return cells; }

AstNode fn(const std::string& name, std::vector<AstNode> kids) {
    AstNode n;
    n.kind = AstKind::Function;
    n.text = name;
    n.children = std::move(kids);
    return n;
}

AstNode text_leaf() {
    AstNode n;
    n.kind = AstKind::TextConst;
    n.text = "x";
    return n;
}

// Random tree over functions F0..F3 and the three leaf classes.
AstNode random_tree(std::mt19937_64& rng, int depth) {
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    if (depth == 0 || pick(3) == 0) {
        AstNode n;
        switch (pick(3)) {
            case 0:
                n.kind = AstKind::NumberConst;
                n.text = "1";
                n.number = 1;
                break;
            case 1: n.kind = AstKind::TextConst; break;
            default:
                n.kind = AstKind::CellReference;
                n.ref.first = n.ref.last = formula::RefCorner{1, 1, false, false};
        }
        return n;
    }
    std::vector<AstNode> kids;
    const int k = 1 + pick(3);
    for (int i = 0; i < k; ++i) kids.push_back(random_tree(rng, depth - 1));
    return fn("F" + std::to_string(pick(4)), std::move(kids));
}

ClassTable random_table() {
    ClassTable t;
    for (int i = 0; i < 4; ++i) t.intern("Function:F" + std::to_string(i));
    return t;
}

}  // namespace

TEST_CASE("equivalence classes") {
    SUBCASE("conversion formulas only") {
        auto g = graph::build_fine_graph(sheet_of({{"B3", "1"}, {"C3", "=B3/3.28/3.28"}, {"C4", "=B4/3.28/3.28"}}));
        auto t = assign_classes(g);
        const std::map<std::string, std::uint64_t> expected = {{"CellRef", 2}, {"Numeric", 3}, {"Text", 5}, {"Operator:/", 7}};
        CHECK(t.entries() == expected);
        CHECK(signature(g.formulas[0].ast, t).hash == 882);
        CHECK(signature(g.formulas[0].ast, t).node_count == 5);
        CHECK(signature(g.formulas[0].ast, t).canonical == "/(/(c,n),n)");
    }
    SUBCASE("empty graph") {
        auto t = assign_classes(graph::SpreadsheetGraph{});
        CHECK(t.entries().size() == 3);
    }
    SUBCASE("IF, > and AVERAGE in post order") {
        auto g = graph::build_fine_graph(sheet_of({{"D3", "=IF(C3>AVERAGE(C$3:C$5),100,0)"}}));
        auto t = assign_classes(g);
        CHECK(t.prime("Function:AVERAGE") == 7);
        CHECK(t.prime("Operator:>") == 11);
        CHECK(t.prime("Function:IF") == 13);
        CHECK(t.prime("Range") == 17);
        auto s = signature(g.formulas[0].ast, t);
        CHECK(s.canonical == "IF(>(c,AVERAGE(R3)),n,n)");
        CHECK(s.node_count == 7);
        // 13 * 11 * 2 * 7 * (17 * 2^3) * 3 * 3
        CHECK(s.hash == 13ull * 11 * 2 * 7 * 17 * 8 * 3 * 3);
    }
    SUBCASE("single number") {
        AstNode n;
        n.kind = AstKind::NumberConst;
        CHECK(signature(n, ClassTable{}).hash == 3);
    }
    SUBCASE("range size is part of the signature") {
        auto g = graph::build_fine_graph(sheet_of({{"C1", "=SUM(A1:A2)"}, {"C2", "=SUM(A1:A3)"}}));
        auto t = assign_classes(g);
        auto a = signature(g.formulas[0].ast, t), b = signature(g.formulas[1].ast, t);
        CHECK(a.hash != b.hash);
        CHECK(a.canonical != b.canonical);
    }
    SUBCASE("booleans are numeric, errors are textual") {
        auto g = graph::build_fine_graph(sheet_of({{"A1", "=IF(TRUE,#N/A,\"x\")"}}));
        auto t = assign_classes(g);
        CHECK(signature(g.formulas[0].ast, t).canonical == "IF(n,t,t)");
    }
}

TEST_CASE("hash collision is split by canonical form") {
    ClassTable t;
    t.set("Function:A", 2);
    t.set("Function:B", 3);
    t.set("Text", 5);
    const AstNode x = fn("A", {fn("B", {text_leaf()}), text_leaf()});
    const AstNode y = fn("B", {fn("A", {text_leaf()}), text_leaf()});
    const auto sx = signature(x, t), sy = signature(y, t);
    CHECK(sx.hash == 150);
    CHECK(sy.hash == 150);
    CHECK(sx.canonical != sy.canonical);
}

TEST_CASE("child permutation keeps the hash and changes the canonical form") {
    std::mt19937_64 rng(7);
    const ClassTable t = random_table();
    int changed = 0;
    for (int i = 0; i < 2000; ++i) {
        AstNode a = random_tree(rng, 4);
        if (a.children.size() < 2) continue;
        AstNode b = a;
        std::swap(b.children.front(), b.children.back());
        const auto sa = signature(a, t), sb = signature(b, t);
        CHECK(sa.hash == sb.hash);
        const bool same_kids = signature(a.children.front(), t).canonical == signature(a.children.back(), t).canonical;
        CHECK((sa.canonical == sb.canonical) == same_kids);
        changed += !same_kids;
        SignatureOptions loose;
        loose.loose = true;
        CHECK(signature(a, t, loose).canonical == signature(b, t, loose).canonical);
    }
    CHECK(changed > 100);
}

TEST_CASE("greedy rectangles") {
    SUBCASE("column vector") {
        auto r = greedy_rectangles(cellset({{3, 2}, {4, 2}, {5, 2}}));
        REQUIRE(r.size() == 1);
        CHECK(r[0] == graph::Region{"", 3, 2, 5, 2});
    }
    SUBCASE("empty") { CHECK(greedy_rectangles({}).empty()); }
    SUBCASE("gap bridging") {
        const auto cells = cellset({{1, 1}, {2, 1}, {4, 1}, {5, 1}});
        auto bridged = greedy_rectangles(cells, RectangleOptions{1});
        REQUIRE(bridged.size() == 1);
        CHECK(bridged[0] == graph::Region{"", 1, 1, 5, 1});
        auto strict = greedy_rectangles(cells, RectangleOptions{0});
        REQUIRE(strict.size() == 2);
        CHECK(strict[0] == graph::Region{"", 1, 1, 2, 1});
        CHECK(strict[1] == graph::Region{"", 4, 1, 5, 1});
        const std::set<std::pair<int, int>> blocked = {{3, 1}};
        CHECK(greedy_rectangles(cells, RectangleOptions{1, 1, &blocked}).size() == 2);
    }
    SUBCASE("larger growth direction wins") {
        // a row of three on top of a column of three: down-then-right from
        // (1,1) gives 3 cells, right-then-down 3; tie keeps right-then-down
        auto r = greedy_rectangles(cellset({{1, 1}, {1, 2}, {1, 3}, {2, 1}, {3, 1}}));
        REQUIRE(r.size() == 2);
        CHECK(r[0] == graph::Region{"", 1, 1, 1, 3});
        // an L whose vertical arm is longer picks down-then-right
        auto s = greedy_rectangles(cellset({{1, 1}, {1, 2}, {2, 1}, {3, 1}, {4, 1}}));
        CHECK(s[0] == graph::Region{"", 1, 1, 4, 1});
    }
    SUBCASE("stride") {
        auto r = greedy_rectangles(cellset({{1, 1}, {1, 3}, {1, 5}}), RectangleOptions{0, 2});
        REQUIRE(r.size() == 1);
        CHECK(r[0] == graph::Region{"", 1, 1, 1, 5});
    }
    SUBCASE("random grids: disjoint, exact cover, deterministic") {
        std::mt19937_64 rng(99);
        for (int trial = 0; trial < 200; ++trial) {
            std::set<std::pair<int, int>> cells;
            const int h = 1 + static_cast<int>(rng() % 20), w = 1 + static_cast<int>(rng() % 20);
            for (int r = 1; r <= h; ++r)
                for (int c = 1; c <= w; ++c)
                    if (rng() % 2) cells.emplace(r, c);
            const auto rects = greedy_rectangles(cells);
            std::map<std::pair<int, int>, int> hits;
            for (const auto& x : rects)
                for (int r = x.row1; r <= x.row2; ++r)
                    for (int c = x.col1; c <= x.col2; ++c) ++hits[{r, c}];
            bool ok = hits.size() == cells.size();
            for (const auto& [cell, k] : hits) ok = ok && k == 1 && cells.count(cell);
            CHECK(ok);
            CHECK(greedy_rectangles(cells) == rects);
        }
    }
}

TEST_CASE("input vectors") {
    SUBCASE("agents fixture") {
        const auto wb = agents();
        auto g = graph::build_fine_graph(wb);
        auto in = detect_input_vectors(g, wb);
        CHECK(regions(in.vectors) == std::vector<std::string>{"Sheet1!B3:B5"});
        CHECK(in.assumptions.empty());
        CHECK(in.candidates.size() == 3);
        CHECK(!in.candidates.count(CellAddress{"Sheet1", 3, 1}));  // label "Fred"
    }
    SUBCASE("referenced reference-free formula") {
        const auto wb = sheet_of({{"A1", "=24*60"}, {"B1", "=A1*2"}, {"C1", "=5*5"}});
        auto g = graph::build_fine_graph(wb);
        auto in = detect_input_vectors(g, wb);
        CHECK(in.candidates == std::set<CellAddress>{CellAddress{"Sheet1", 1, 1}});
        CHECK(in.vectors.empty());
        CHECK(in.assumptions == std::vector<CellAddress>{CellAddress{"Sheet1", 1, 1}});
    }
    SUBCASE("gap bridging over blank cells only") {
        const auto wb = sheet_of({{"A1", "1"}, {"A2", "2"}, {"A4", "4"}, {"A5", "5"}, {"B1", "=SUM(A1:A5)"}});
        auto g = graph::build_fine_graph(wb);
        DetectOptions o;
        o.max_gap = 1;
        CHECK(regions(detect_input_vectors(g, wb, o).vectors) == std::vector<std::string>{"Sheet1!A1:A5"});
        CHECK(regions(detect_input_vectors(g, wb).vectors) ==
              std::vector<std::string>{"Sheet1!A1:A2", "Sheet1!A4:A5"});
    }
}

TEST_CASE("vector operations") {
    SUBCASE("agents fixture") {
        const auto wb = agents();
        auto g = graph::build_fine_graph(wb);
        auto ops = detect_vector_ops(g, wb);
        CHECK(regions(ops) == std::vector<std::string>{"Sheet1!C3:C5", "Sheet1!D3:D5"});
        REQUIRE(ops.size() == 2);
        CHECK(ops[0].reference_pattern == std::vector<std::string>{"rel:0,-1"});
        CHECK(ops[0].constants == std::vector<std::string>{"n:3.28", "n:3.28"});
        CHECK(ops[1].reference_pattern == std::vector<std::string>{"rel:0,-1", "abs:Sheet1!C3:C5"});
        CHECK(ops[1].sig->canonical == "IF(>(c,AVERAGE(R3)),n,n)");
    }
    SUBCASE("constants must match") {
        const auto wb = sheet_of({{"B1", "=A1*2"}, {"B2", "=A1*3"}});
        auto g = graph::build_fine_graph(wb);
        auto t = assign_classes(g);
        CHECK(signature(g.formulas[0].ast, t) == signature(g.formulas[1].ast, t));
        CHECK(detect_vector_ops(g, wb).empty());
    }
    SUBCASE("argument order matters unless loose") {
        const auto wb = sheet_of({{"C1", "=A1-B1"}, {"C2", "=B2-A2"}});
        auto g = graph::build_fine_graph(wb);
        CHECK(detect_vector_ops(g, wb).empty());
    }
    SUBCASE("absolute and relative references mix") {
        const auto wb = sheet_of({{"A1", "2"}, {"B2", "=$A$1*A2"}, {"B3", "=$A$1*A3"}, {"B4", "=$A$1*A5"}});
        auto g = graph::build_fine_graph(wb);
        CHECK(regions(detect_vector_ops(g, wb)) == std::vector<std::string>{"Sheet1!B2:B3"});
    }
}

TEST_CASE("detection agrees with the brute-force oracle") {
    std::mt19937_64 rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const Workbook wb = testing::random_workbook(rng);
        auto g = graph::build_fine_graph(wb);
        const auto exclude = testing::oracle_input_candidates(wb);
        CHECK(detect_input_vectors(g, wb).candidates == exclude);
        auto groups = isomorphism_groups(g, wb, assign_classes(g), exclude);
        std::vector<std::vector<CellAddress>> got;
        for (const auto& grp : groups) {
            std::vector<CellAddress> v;
            for (const auto& p : grp) v.push_back(p.address);
            got.push_back(v);
        }
        auto expected = testing::oracle_partition(wb, exclude);
        std::sort(got.begin(), got.end());
        std::sort(expected.begin(), expected.end());
        CHECK(got == expected);

        // post hoc: members of every vector-op are pairwise isomorphic and colocated
        std::map<CellAddress, testing::OracleCell> oc;
        for (auto& c : testing::oracle_cells(wb)) oc.emplace(c.at, c);
        for (const auto& v : detect_vector_ops(g, wb)) {
            CHECK(v.cells.size() >= 2);
            for (const auto& a : v.cells) {
                CHECK(v.region.contains(a.row, a.col));
                CHECK(!exclude.count(a));
                for (const auto& b : v.cells) CHECK(testing::oracle_isomorphic(oc.at(a), oc.at(b)));
            }
        }
    }
}

TEST_CASE("shared subexpressions") {
    SUBCASE("agents fixture") {
        auto g = graph::build_fine_graph(agents());
        auto cse = detect_cse(g);
        std::map<std::string, std::pair<int, std::size_t>> by_form;
        for (const auto& grp : cse.groups) by_form[grp.sig.canonical] = {grp.sig.node_count, grp.instances.size()};
        const std::map<std::string, std::pair<int, std::size_t>> expected = {
            {"/(/(c,n),n)", {5, 3}},
            {"/(c,n)", {3, 3}},
            {"IF(>(c,AVERAGE(R3)),n,n)", {7, 3}},
            {">(c,AVERAGE(R3))", {4, 3}},
        };
        CHECK(by_form == expected);
        CHECK(cse.mean_size() == doctest::Approx(4.75));
        CHECK(cse.mean_instances() == doctest::Approx(3.0));
    }
    SUBCASE("one constant") {
        auto g = graph::build_fine_graph(sheet_of({{"A1", "=1"}}));
        CHECK(detect_cse(g).groups.empty());
    }
    SUBCASE("groups never mix canonical forms") {
        std::mt19937_64 rng(3);
        Workbook wb;
        for (int i = 0; i < 400; ++i)
            wb.set_cell(Cell{CellAddress{"S", 1 + i / 10, 1 + i % 10}, Blank{},
                             formula::to_formula(random_tree(rng, 3))});
        auto g = graph::build_fine_graph(wb);
        CHECK(g.report.parsed == 400);
        std::map<std::string, const AstNode*> subtree;
        for (const auto& cf : g.formulas) {
            std::size_t k = 0;
            std::function<void(const AstNode&)> walk = [&](const AstNode& n) {
                subtree[g.nodes[static_cast<std::size_t>(cf.ast_nodes[k++])].id] = &n;
                for (const auto& c : n.children) walk(c);
            };
            walk(cf.ast);
        }
        auto cse = detect_cse(g, 1);
        CHECK(cse.groups.size() > 10);
        for (const auto& grp : cse.groups) {
            const std::string shape = testing::oracle_shape(*subtree.at(grp.instances.front()));
            for (const auto& id : grp.instances) CHECK(testing::oracle_shape(*subtree.at(id)) == shape);
        }
    }
}

TEST_CASE("compression") {
    SUBCASE("agents fixture") {
        const auto wb = agents();
        auto r = analyze(wb);
        CHECK(r.compression.non_blank == 20);
        CHECK(r.compression.input_vector_cells == 3);
        CHECK(r.compression.vector_cells == 6);
        CHECK(r.compression.input_pct() == doctest::Approx(0.15));
        CHECK(r.compression.vector_pct() == doctest::Approx(0.30));
        CHECK(r.compression.total_pct() == doctest::Approx(0.45));
        CHECK(!r.compression.empty);
    }
    SUBCASE("empty workbook") {
        auto r = analyze(load_workbook(kFixtures + "/empty.json").workbook);
        CHECK(r.compression.empty);
        CHECK(r.compression.total_pct() == 0);
    }
}

TEST_CASE("report output") {
    const auto wb = agents();
    auto r = analyze(wb, {}, "agents.json");
    const std::string json = report_json(r);
    CHECK(json.find("\"Sheet1!B3:B5\"") != std::string::npos);
    CHECK(json.find("\"totalPct\": 0.45") != std::string::npos);
    std::ifstream golden(kFixtures + "/../golden/agents.report.json");
    REQUIRE(golden);
    std::stringstream ss;
    ss << golden.rdbuf();
    CHECK(json == ss.str());
    CHECK(csv_row(r).rfind("agents.json,20,8,8,1.0000,1,2,0,3,6,0.1500,0.3000,0.4500,4,4.7500,3.0000", 0) == 0);

    auto g = graph::build_fine_graph(wb);
    auto bs = detected_boundaries(g, r);
    CHECK(bs.size() == 20 - 9 + 3);
}

TEST_CASE("fixture analysis is fast") {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = analyze(agents());
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
    CHECK(r.vector_ops.size() == 2);
}
