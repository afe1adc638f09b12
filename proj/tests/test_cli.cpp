#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string cli_path() {
    const char* p = std::getenv("L1W_CLI");
    REQUIRE(p != nullptr);
    return p;
}

std::string tmp(const std::string& name) { return "cli_tmp_" + name; }

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >" + tmp("stdout.txt") + " 2>" +
                            tmp("stderr.txt");
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("build documents round trip byte for byte") {
    CHECK(run("build --system laakso-split --depth 2 --out " + tmp("a.json")) == 0);
    CHECK(run("build --spec " + tmp("a.json") + " --out " + tmp("b.json")) == 0);
    CHECK(slurp(tmp("a.json")) == slurp(tmp("b.json")));
}

TEST_CASE("dot export counts gadget edges") {
    CHECK(run("build --system laakso-diamond --depth 1 --dot " + tmp("d.dot")) == 0);
    const std::string dot = slurp(tmp("d.dot"));
    std::size_t arrows = 0;
    for (std::size_t pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 2))
        ++arrows;
    CHECK(arrows == 14);  // 6 gadget edges over the window + 2 collars x 4
}

TEST_CASE("verify exits zero on the examples") {
    CHECK(run("verify --system laakso-split --depth 2 --out " + tmp("v.json")) == 0);
    const std::string rep = slurp(tmp("v.json"));
    CHECK(rep.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("identical configurations produce byte-identical outputs") {
    CHECK(run("verify --system laakso-diamond --depth 1 --sampler-draws 5000 --seed 11 --out " +
              tmp("r1.json")) == 0);
    CHECK(run("verify --system laakso-diamond --depth 1 --sampler-draws 5000 --seed 11 --out " +
              tmp("r2.json")) == 0);
    CHECK(slurp(tmp("r1.json")) == slurp(tmp("r2.json")));
    CHECK(run("embed --system laakso-split --depth 2 --level 2 --out " + tmp("m1.csv")) == 0);
    CHECK(run("embed --system laakso-split --depth 2 --level 2 --out " + tmp("m2.csv")) == 0);
    CHECK(slurp(tmp("m1.csv")) == slurp(tmp("m2.csv")));
}

TEST_CASE("embed emits exact CSV and a distortion report") {
    CHECK(run("embed --system line --span -1,2 --depth 2 --level 2 --out " + tmp("e.csv") +
              " --report " + tmp("e.json")) == 0);
    const std::string rep = slurp(tmp("e.json"));
    CHECK(rep.find("\"min_ratio\": \"1\"") != std::string::npos);
    CHECK(rep.find("\"max_ratio\": \"1\"") != std::string::npos);
    const std::string csv = slurp(tmp("e.csv"));
    CHECK(csv.find("point,slice,value") == 0);
    // Every value is an exact rational: digits and at most one slash.
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::string value = line.substr(line.rfind(',') + 1);
        CHECK(value.find_first_not_of("0123456789/-") == std::string::npos);
        ++rows;
    }
    CHECK(rows > 0);
}

TEST_CASE("factorize round trips the grid fixture") {
    spit(tmp("pts.csv"), "p0\np1\np2\np3\n");
    spit(tmp("dist.csv"), "0,1/3,2/3,1\n1/3,0,1/3,2/3\n2/3,1/3,0,1/3\n1,2/3,1/3,0\n");
    spit(tmp("u.csv"), "0\n1/3\n2/3\n1\n");
    CHECK(run("factorize --points " + tmp("pts.csv") + " --dist " + tmp("dist.csv") + " --u " +
              tmp("u.csv") + " --base 3 --imin 0 --imax 1 --out " + tmp("fsys.json") +
              " --maps " + tmp("fmaps.csv") + " --report " + tmp("frep.json")) == 0);
    const std::string rep = slurp(tmp("frep.json"));
    CHECK(rep.find("\"lprime\": \"1\"") != std::string::npos);
    CHECK(rep.find("\"compatible\": true") != std::string::npos);
    // The emitted explicit system document loads back and verifies: the
    // measure checks all apply; the path-metric band is reported as
    // inapplicable (finite data cannot satisfy the openness condition).
    CHECK(run("build --spec " + tmp("fsys.json")) == 0);
    CHECK(run("verify --spec " + tmp("fsys.json") + " --out " + tmp("fver.json")) == 0);
    const std::string ver = slurp(tmp("fver.json"));
    CHECK(ver.find("\"pass\": true") != std::string::npos);
    CHECK(ver.find("\"applicable\": false") != std::string::npos);
}

TEST_CASE("non-Lipschitz input is rejected naming the pair") {
    spit(tmp("pts.csv"), "p0\np1\n");
    spit(tmp("dist.csv"), "0,1\n1,0\n");
    spit(tmp("u.csv"), "0\n5\n");
    CHECK(run("factorize --points " + tmp("pts.csv") + " --dist " + tmp("dist.csv") + " --u " +
              tmp("u.csv")) == 2);
    const std::string err = slurp(tmp("stderr.txt"));
    CHECK(err.find("not 1-Lipschitz") != std::string::npos);
    CHECK(err.find("p1") != std::string::npos);
}

TEST_CASE("custom replacement gadgets run the whole pipeline") {
    // A three-adic doubled-middle replacement: subdivide into 3 and split the
    // middle cell into two parallel one-cell branches.
    spit(tmp("gadget3.json"),
         R"({"format":1,"type":"inverse-system","kind":"builtin","recipe":{"name":"laakso-diamond",
             "depth":2,"gadget":{"base":3,"vertices":[{"name":"v0","height":0},{"name":"q1","height":1},
             {"name":"a","height":2},{"name":"b","height":2},{"name":"v3","height":3}],
             "edges":[{"from":0,"to":1,"sub_index":0},{"from":1,"to":2,"sub_index":1},
             {"from":1,"to":3,"sub_index":1},{"from":2,"to":4,"sub_index":2},
             {"from":3,"to":4,"sub_index":2}]}}})");
    CHECK(run("build --spec " + tmp("gadget3.json") + " --out " + tmp("g3sys.json")) == 0);
    CHECK(run("verify --spec " + tmp("gadget3.json") + " --sampler-draws 20000 --out " +
              tmp("g3rep.json")) == 0);
    const std::string rep = slurp(tmp("g3rep.json"));
    CHECK(rep.find("\"pass\": true") != std::string::npos);
    CHECK(run("embed --spec " + tmp("gadget3.json") + " --level 2 --out " + tmp("g3emb.csv")) ==
          0);
}

TEST_CASE("bad gadget files exit with an input error naming the field") {
    spit(tmp("bad.json"),
         R"({"format":1,"type":"inverse-system","kind":"builtin","recipe":{"name":"laakso-diamond",
             "depth":1,"gadget":{"base":4,"vertices":[{"name":"v0","height":0},{"name":"q1","height":1},
             {"name":"a2","height":2},{"name":"b2","height":2},{"name":"q3","height":3},
             {"name":"v4","height":3}],"edges":[{"from":0,"to":1,"sub_index":0},{"from":1,"to":2,"sub_index":1},
             {"from":1,"to":3,"sub_index":1},{"from":2,"to":4,"sub_index":2},{"from":3,"to":4,"sub_index":2},
             {"from":4,"to":5,"sub_index":3}]}}})");
    CHECK(run("build --spec " + tmp("bad.json")) == 2);
    CHECK(slurp(tmp("stderr.txt")).find("sink") != std::string::npos);
}

TEST_CASE("window and seed overrides") {
    // Restricting the seeds shrinks the safe region; the embed subcommand
    // reports fewer points but stays exact.
    CHECK(run("embed --system laakso-split --depth 1 --level 1 --slice-seeds 0,1/3,2/3,1 --out " +
              tmp("s1.csv")) == 0);
    CHECK(run("embed --system laakso-split --depth 1 --level 1 --slice-seeds 1/3,2/3 --out " +
              tmp("s2.csv")) == 0);
    CHECK(slurp(tmp("s1.csv")) != slurp(tmp("s2.csv")));
    CHECK(run("embed --system laakso-split --depth 1 --level 1 --slice-seeds 1/7") == 2);
    CHECK(run("verify --system line --span -1,2 --depth 2 --window 0,1") == 0);
}

TEST_CASE("metrics subcommand prints verified certificates") {
    CHECK(run("metrics --system laakso-split --depth 2 --pair 0.a.a,1.b.b --bracket "
              "--certificate") == 0);
    const std::string out = slurp(tmp("stdout.txt"));
    CHECK(out.find("dbar") != std::string::npos);
    CHECK(out.find("(verified)") != std::string::npos);
    CHECK(run("metrics --system laakso-split --depth 2 --pair nope,1.b.b") == 2);
}
