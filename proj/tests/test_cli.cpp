#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kFixtures = CELLSCOPE_FIXTURES;
const std::string kGolden = CELLSCOPE_GOLDEN;
const std::string kBinary = CELLSCOPE_BINARY;

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI through the shell; `env` is prepended verbatim.
Run cellscope(const std::string& args, const std::string& env = "") {
    const fs::path err = fs::temp_directory_path() / "cellscope_cli_stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + kBinary + " " + args + " 2>" + err.string();
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream e(err);
    r.err.assign(std::istreambuf_iterator<char>(e), {});
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "cellscope-XXXXXX").string();
        REQUIRE(mkdtemp(tmpl.data()));
        path = tmpl;
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("analyze") {
    const std::string agents = kFixtures + "/agents.json";

    SUBCASE("fixture matches the golden report") {
        const Run r = cellscope("analyze " + agents);
        CHECK(r.code == 0);
        CHECK(json::parse(r.out) == json::parse(slurp(kGolden + "/agents.report.json")));
        const json j = json::parse(r.out);
        CHECK(j["compression"]["totalPct"].get<double>() == doctest::Approx(0.45));
    }
    SUBCASE("xlsx gives the same detection") {
        const Run x = cellscope("analyze " + kFixtures + "/agents.xlsx");
        REQUIRE(x.code == 0);
        json a = json::parse(x.out), b = json::parse(slurp(kGolden + "/agents.report.json"));
        CHECK(a["inputVectors"] == b["inputVectors"]);
        CHECK(a["vectorOps"] == b["vectorOps"]);
        CHECK(a["compression"] == b["compression"]);
        CHECK(a["cse"] == b["cse"]);
    }
    SUBCASE("output file and csv") {
        TempDir t;
        const Run r = cellscope("analyze " + agents + " -o " + (t.path / "r.json").string() + " --csv " +
                                (t.path / "r.csv").string());
        CHECK(r.code == 0);
        CHECK(r.out.empty());
        CHECK(json::parse(slurp(t.path / "r.json")) == json::parse(slurp(kGolden + "/agents.report.json")));
        const std::string csv = slurp(t.path / "r.csv");
        CHECK(csv.rfind("file,", 0) == 0);
        CHECK(csv.find("\nagents.json,20,8,8,") != std::string::npos);
    }
    SUBCASE("empty workbook is flagged, exit 0") {
        const Run r = cellscope("analyze " + kFixtures + "/empty.json");
        CHECK(r.code == 0);
        CHECK(json::parse(r.out)["compression"]["empty"] == true);
        CHECK(r.err.find("empty") != std::string::npos);
    }
    SUBCASE("bad path and malformed workbook exit 1") {
        CHECK(cellscope("analyze /no/such/workbook.json").code == 1);
        const Run r = cellscope("analyze " + kFixtures + "/corpus/broken.json");
        CHECK(r.code == 1);
        CHECK(r.err.find("malformed") != std::string::npos);
    }
    SUBCASE("parse-failure threshold exits 2") {
        const std::string bad = kFixtures + "/corpus/unparsed.json";
        CHECK(cellscope("analyze " + bad).code == 0);
        CHECK(cellscope("analyze " + bad + " --max-parse-failure 0.6").code == 0);
        CHECK(cellscope("analyze " + bad + " --max-parse-failure 0.4").code == 2);
    }
    SUBCASE("corpus directory writes one CSV row per readable file") {
        TempDir t;
        const Run r = cellscope("analyze " + kFixtures + "/corpus --csv " + (t.path / "c.csv").string() +
                                " --out-dir " + (t.path / "reports").string());
        CHECK(r.code == 0);
        std::size_t files = 0;
        for (const auto& e : fs::directory_iterator(kFixtures + "/corpus"))
            if (e.path().extension() == ".json") ++files;
        std::ifstream csv(t.path / "c.csv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(csv, line)) ++rows;
        CHECK(rows == files);  // header + all but the unreadable one
        CHECK(fs::exists(t.path / "reports" / "loan-0.json.report.json"));
        CHECK(r.err.find("1 unreadable") != std::string::npos);
        CHECK(cellscope("analyze " + kFixtures + "/corpus --csv /dev/null --max-parse-failure 0.001").code == 2);
    }
    SUBCASE("usage errors exit 1") {
        CHECK(cellscope("").code == 1);
        CHECK(cellscope("analyze").code == 1);
        CHECK(cellscope("analyze " + agents + " --stride 0").code == 1);
        CHECK(cellscope("frobnicate").code == 1);
    }
}

TEST_CASE("graph") {
    const std::string agents = kFixtures + "/agents.json";
    SUBCASE("fixture matches the golden GraphML") {
        const Run r = cellscope("graph " + agents);
        CHECK(r.code == 0);
        CHECK(r.out == slurp(kGolden + "/agents.graphml"));
    }
    SUBCASE("empty workbook gives an empty graph") {
        const Run r = cellscope("graph " + kFixtures + "/empty.json --level cell");
        CHECK(r.code == 0);
        CHECK(r.out.find("<graphml") != std::string::npos);
        CHECK(r.out.find("<node") == std::string::npos);
        CHECK(r.out.find("<edge") == std::string::npos);
    }
    SUBCASE("seed cell slices the cell graph") {
        const Run r = cellscope("graph " + agents + " --level cell --seed-cell C7 --json");
        REQUIRE(r.code == 0);
        const json g = json::parse(r.out);
        std::set<std::string> ids;
        for (const auto& n : g["nodes"]) ids.insert(n["id"]);
        CHECK(ids == std::set<std::string>{"Sheet1!R7C3", "range:Sheet1!R3C3:R5C3", "Sheet1!R3C3", "Sheet1!R4C3",
                                           "Sheet1!R5C3", "Sheet1!R3C2", "Sheet1!R4C2", "Sheet1!R5C2"});
        const Run blank = cellscope("graph " + agents + " --level cell --seed-cell Z99 --json");
        CHECK(blank.code == 0);
        CHECK(json::parse(blank.out)["nodes"].size() == 1);
        CHECK(cellscope("graph " + agents + " --level cell --seed-cell 9Z").code == 1);
    }
    SUBCASE("nested export") {
        const Run r = cellscope("graph " + agents + " --nested");
        CHECK(r.code == 0);
        CHECK(r.out.find("<graph id=") != r.out.rfind("<graph id="));
    }
}

TEST_CASE("layout") {
    const std::string agents = kFixtures + "/agents.json";
    SUBCASE("five decades give six panels") {
        TempDir t;
        const Run r = cellscope("layout " + agents + " --gravity-sweep 5 --ticks 200 -o " + t.path.string());
        REQUIRE(r.code == 0);
        for (int k = 0; k < 6; ++k) {
            CHECK(fs::exists(t.path / ("panel-" + std::to_string(k) + ".json")));
            CHECK(fs::exists(t.path / ("panel-" + std::to_string(k) + ".svg")));
        }
        CHECK_FALSE(fs::exists(t.path / "panel-6.json"));
        const json s = json::parse(slurp(t.path / "sweep.json"));
        CHECK(s["panels"].size() == 6);
        CHECK(s["anchorDistanceMonotone"] == true);
        CHECK(r.err.find("panel 5") != std::string::npos);
        CHECK(slurp(t.path / "sweep.svg").find("<svg") != std::string::npos);
    }
    SUBCASE("no sweep gives one panel") {
        TempDir t;
        CHECK(cellscope("layout " + agents + " --ticks 50 -o " + t.path.string()).code == 0);
        CHECK(fs::exists(t.path / "panel-0.json"));
        CHECK_FALSE(fs::exists(t.path / "panel-1.json"));
    }
    SUBCASE("deterministic, and the seed comes from the flag or the environment") {
        TempDir a, b, c, d;
        const std::string base = "layout " + agents + " --ticks 30 --gravity 1 -o ";
        CHECK(cellscope(base + a.path.string()).code == 0);
        CHECK(cellscope(base + b.path.string()).code == 0);
        CHECK(cellscope(base + c.path.string(), "CELLSCOPE_SEED=99").code == 0);
        CHECK(cellscope(base + d.path.string() + " --seed 99", "CELLSCOPE_SEED=5").code == 0);
        const std::string pa = slurp(a.path / "panel-0.json"), pc = slurp(c.path / "panel-0.json");
        CHECK(pa == slurp(b.path / "panel-0.json"));
        CHECK(pa != pc);
        CHECK(pc == slurp(d.path / "panel-0.json"));
        CHECK(cellscope(base + a.path.string(), "CELLSCOPE_SEED=abc").code == 1);
    }
    SUBCASE("empty workbook has nothing to lay out") {
        TempDir t;
        CHECK(cellscope("layout " + kFixtures + "/empty.json -o " + t.path.string()).code == 1);
    }
}
