#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <l1weaver/builders.hpp>
#include <l1weaver/metrics.hpp>

using namespace l1weaver;

namespace {

/// Independent oracle: Floyd-Warshall over the top-level vertices where the
/// allowed moves are full-edge walks and star hops (every pair of vertices
/// whose projections share a closed star at some level, at cost 2*m^-level).
/// Exact rational arithmetic throughout; shares nothing with DbarEngine's
/// half-cost star-node Dijkstra.
std::vector<std::vector<Rational>> dbar_bruteforce(const InverseSystem& sys, int top) {
    const LevelGraph& g = sys.graph_at(top);
    const std::size_t n = g.vertex_count();
    const Rational inf(1000000);
    std::vector<std::vector<Rational>> d(n, std::vector<Rational>(n, inf));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
    auto relax_pair = [&](std::size_t a, std::size_t b, const Rational& c) {
        if (c < d[a][b]) d[a][b] = d[b][a] = c;
    };
    for (EdgeId e = 0; e < g.edge_count(); ++e)
        relax_pair(g.edge(e).tail, g.edge(e).head, g.edge_length());
    for (int lvl = sys.first_level; lvl <= top; ++lvl) {
        const LevelGraph& gk = sys.graph_at(lvl);
        const Rational hop = 2 * rational_pow(sys.base, -lvl);
        std::vector<SubPoint> proj(n);
        for (VertexId v = 0; v < n; ++v)
            proj[v] = project(sys, top, lvl, SubPoint::at_vertex(v));
        for (VertexId c = 0; c < gk.vertex_count(); ++c) {
            std::vector<std::size_t> members;
            for (VertexId v = 0; v < n; ++v)
                if (in_closed_star(gk, proj[v], c)) members.push_back(v);
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = i + 1; j < members.size(); ++j)
                    relax_pair(members[i], members[j], hop);
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    return d;
}

}  // namespace

TEST_CASE("path metric basics") {
    InverseSystem sys = build_line(1, Interval{Rational(0), Rational(1)}, 3);
    const LevelGraph& g = sys.graph_at(1);
    // Adjacent vertices sit one edge length apart (vertex 2 is the 1/3 point).
    CHECK(g.height(2) == Rational(1, 3));
    CHECK(*path_metric(g, SubPoint::at_vertex(0), SubPoint::at_vertex(2)) == Rational(1, 3));
    CHECK(*path_metric(g, SubPoint::at_vertex(0), SubPoint::at_vertex(1)) == Rational(1));
    CHECK(*path_metric(g, SubPoint::at_vertex(2), SubPoint::at_vertex(2)) == Rational(0));
    // Partial-edge distances are exact.
    SubPoint a = make_edge_point(g, 0, 1, 1);  // 1/3 into the first cell
    SubPoint b = make_edge_point(g, 1, 2, 1);  // 2/3 into the second cell
    CHECK(*path_metric(g, a, b) == Rational(2, 9) + Rational(2, 9));
    CHECK(*path_metric(g, a, make_edge_point(g, 0, 2, 1)) == Rational(1, 9));
}

TEST_CASE("path metric is infinite across components") {
    LevelGraph g(0, 3);
    VertexId a = g.add_vertex(Rational(0), "a");
    VertexId b = g.add_vertex(Rational(1), "b");
    VertexId c = g.add_vertex(Rational(0), "c");
    VertexId d = g.add_vertex(Rational(1), "d");
    g.add_edge(a, b);
    g.add_edge(c, d);
    g.finalize();
    CHECK(!path_metric(g, SubPoint::at_vertex(a), SubPoint::at_vertex(d)).has_value());
    CHECK(path_metric(g, SubPoint::at_vertex(a), SubPoint::at_vertex(b)).has_value());
}

TEST_CASE("star-chain metric matches the brute-force oracle") {
    std::vector<InverseSystem> systems;
    systems.push_back(build_line(2, Interval{Rational(0), Rational(1)}, 3));
    systems.push_back(build_split(1));
    systems.push_back(build_split(2));
    systems.push_back(build_diamond(1));
    for (const auto& sys : systems) {
        const int top = sys.top_level();
        DbarEngine engine(sys, top);
        auto oracle = dbar_bruteforce(sys, top);
        auto mat = engine.vertex_matrix();
        const std::size_t n = sys.graph_at(top).vertex_count();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                INFO("top " << top << " pair " << i << "," << j);
                CHECK(mat[i][j] == oracle[i][j]);
            }
    }
}

TEST_CASE("star-chain metric axioms and bounds") {
    InverseSystem sys = build_split(2);
    const int top = 2;
    const LevelGraph& g = sys.graph_at(top);
    DbarEngine engine(sys, top);
    auto d = engine.vertex_matrix();
    const std::size_t n = g.vertex_count();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(d[i][i] == Rational(0));
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(d[i][j] == d[j][i]);
            if (i != j) CHECK(d[i][j] > Rational(0));
            // Never exceeds the path metric.
            auto pm = path_metric(g, SubPoint::at_vertex(static_cast<VertexId>(i)),
                                  SubPoint::at_vertex(static_cast<VertexId>(j)));
            REQUIRE(pm.has_value());
            CHECK(d[i][j] <= *pm);
        }
    }
    // Triangle inequality, exhaustively.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) CHECK(d[i][j] <= d[i][k] + d[k][j]);
}

TEST_CASE("directed pairs realize exactly the height difference") {
    for (const auto& sys : {build_split(2), build_diamond(1)}) {
        const int top = sys.top_level();
        const LevelGraph& g = sys.graph_at(top);
        DbarEngine engine(sys, top);
        auto d = engine.vertex_matrix();
        for (VertexId a = 0; a < g.vertex_count(); ++a)
            for (VertexId b = 0; b < g.vertex_count(); ++b) {
                if (a == b) continue;
                if (precedes(g, SubPoint::at_vertex(a), SubPoint::at_vertex(b)))
                    CHECK(d[a][b] == g.height(b) - g.height(a));
            }
    }
}

TEST_CASE("shared closed stars bound the distance by 2m^-i") {
    InverseSystem sys = build_split(2);
    const int top = 2;
    const LevelGraph& g = sys.graph_at(top);
    DbarEngine engine(sys, top);
    auto d = engine.vertex_matrix();
    for (int lvl = 0; lvl <= top; ++lvl) {
        const LevelGraph& gk = sys.graph_at(lvl);
        const Rational bound = 2 * rational_pow(sys.base, -lvl);
        for (VertexId a = 0; a < g.vertex_count(); ++a)
            for (VertexId b = a + 1; b < g.vertex_count(); ++b) {
                SubPoint pa = project(sys, top, lvl, SubPoint::at_vertex(a));
                SubPoint pb = project(sys, top, lvl, SubPoint::at_vertex(b));
                bool share = false;
                for (VertexId c = 0; c < gk.vertex_count() && !share; ++c)
                    if (in_closed_star(gk, pa, c) && in_closed_star(gk, pb, c)) share = true;
                if (share) CHECK(d[a][b] <= bound);
            }
    }
}

TEST_CASE("certificates re-verify and tampering is caught") {
    InverseSystem sys = build_split(2);
    const int top = 2;
    DbarEngine engine(sys, top);
    const LevelGraph& g = sys.graph_at(top);
    std::size_t checked = 0;
    for (VertexId a = 0; a < g.vertex_count(); a += 3)
        for (VertexId b = a + 1; b < g.vertex_count(); b += 5) {
            SubPoint x = SubPoint::at_vertex(a), y = SubPoint::at_vertex(b);
            auto cert = engine.certificate(x, y);
            CHECK(cert.total == engine.distance(x, y));
            std::string why;
            bool ok = verify_star_chain(sys, top, x, y, cert, &why);
            INFO(why);
            CHECK(ok);
            ++checked;
        }
    CHECK(checked > 10);

    SubPoint x = SubPoint::at_vertex(0), y = SubPoint::at_vertex(5);
    auto cert = engine.certificate(x, y);
    REQUIRE(!cert.moves.empty());
    cert.moves[0].cost += Rational(1, 100);
    CHECK(!verify_star_chain(sys, top, x, y, cert));
}

TEST_CASE("outlandish denominators are refused, sane ones are exact") {
    InverseSystem sys = build_split(1);
    const LevelGraph& g1 = sys.graph_at(1);
    DbarEngine engine(sys, 1);
    GraphPoint ok = GraphPoint::on_edge(g1, 0, Rational(1, 7));
    GraphPoint tail = GraphPoint::of_vertex(g1.edge(0).tail);
    CHECK(engine.distance_point(tail, ok) == Rational(1, 7) * g1.edge_length());
    GraphPoint huge = GraphPoint::on_edge(g1, 0, Rational(1, BigInt(1) << 62));
    CHECK_THROWS_AS(engine.distance_point(tail, huge), DomainError);
}

TEST_CASE("mid-edge points are first-class for the star-chain metric") {
    InverseSystem sys = build_split(1);
    const LevelGraph& g1 = sys.graph_at(1);
    DbarEngine engine(sys, 1);
    // Two interior points on one edge: distance along the edge.
    SubPoint p = make_edge_point(g1, 0, 1, 1);
    SubPoint q = make_edge_point(g1, 0, 2, 1);
    CHECK(engine.distance(p, q) == Rational(1, 9));
    CHECK(engine.distance(p, p) == Rational(0));
    auto cert = engine.certificate(p, q);
    CHECK(verify_star_chain(sys, 1, p, q, cert));
}

TEST_CASE("trimmed-star bracket") {
    InverseSystem sys = build_diamond(1);
    const LevelGraph& g1 = sys.graph_at(1);
    VertexId a2 = kNoVertex, b2 = kNoVertex;
    for (VertexId v = 0; v < g1.vertex_count(); ++v) {
        if (g1.label(v).find(".a2") != std::string::npos) a2 = v;
        if (g1.label(v).find(".b2") != std::string::npos) b2 = v;
    }
    REQUIRE(a2 != kNoVertex);
    SubPoint x = SubPoint::at_vertex(a2), y = SubPoint::at_vertex(b2);
    auto br = trimmed_star_bracket(sys, 1, x, y);
    CHECK(br.level == 1);
    Rational d = DbarEngine(sys, 1).distance(x, y);
    CHECK(br.lower < d);
    CHECK(d <= br.upper);
    CHECK_THROWS_AS(trimmed_star_bracket(sys, 1, x, x), DomainError);
}

TEST_CASE("bracket sandwiches the distance for every distinct pair") {
    for (const auto& sys : {build_split(2), build_diamond(1)}) {
        const int top = sys.top_level();
        const LevelGraph& g = sys.graph_at(top);
        DbarEngine engine(sys, top);
        auto d = engine.vertex_matrix();
        for (VertexId a = 0; a < g.vertex_count(); ++a)
            for (VertexId b = a + 1; b < g.vertex_count(); ++b) {
                auto br = trimmed_star_bracket(sys, top, SubPoint::at_vertex(a),
                                               SubPoint::at_vertex(b));
                INFO(g.label(a) << " vs " << g.label(b) << " level " << br.level);
                CHECK(br.lower < d[a][b]);
                CHECK(d[a][b] <= br.upper);
            }
    }
}

TEST_CASE("small distances force a shared closed star") {
    // Contrapositive of the bracket's lower bound at the witness level.
    InverseSystem sys = build_split(2);
    const int top = 2;
    const LevelGraph& g = sys.graph_at(top);
    DbarEngine engine(sys, top);
    auto d = engine.vertex_matrix();
    for (int lvl = 0; lvl <= top; ++lvl) {
        const LevelGraph& gk = sys.graph_at(lvl);
        const Rational thr = rational_pow(3, -lvl);
        for (VertexId a = 0; a < g.vertex_count(); ++a)
            for (VertexId b = a + 1; b < g.vertex_count(); ++b) {
                if (d[a][b] > thr) continue;
                SubPoint pa = project(sys, top, lvl, SubPoint::at_vertex(a));
                SubPoint pb = project(sys, top, lvl, SubPoint::at_vertex(b));
                bool share = false;
                for (VertexId c = 0; c < gk.vertex_count() && !share; ++c)
                    if (in_closed_star(gk, pa, c) && in_closed_star(gk, pb, c)) share = true;
                CHECK(share);
            }
    }
}

TEST_CASE("height map is Lipschitz light") {
    // Line: each component is the interval itself.
    {
        InverseSystem line = build_line(2, Interval{Rational(0), Rational(1)}, 3);
        auto rep = phi_lipschitz_light_check(line, grid_intervals(line, 2), 2);
        CHECK(rep.pass);
        CHECK(rep.worst_ratio <= Rational(1));
    }
    {
        InverseSystem sys = build_split(2);
        auto rep = phi_lipschitz_light_check(sys, grid_intervals(sys, 2), 2);
        CHECK(rep.pass);
        CHECK(rep.worst_ratio <= Rational(24));  // 8m with m = 3
        // The whole window is one delta-component of itself.
        bool found_unit = false;
        for (const auto& stat : rep.intervals)
            if (stat.interval_lo == Rational(0) && stat.interval_hi == Rational(1)) {
                found_unit = true;
                CHECK(stat.components == 1);
            }
        CHECK(found_unit);
    }
}

TEST_CASE("line endpoints sit at exactly the span length") {
    for (int depth : {0, 1, 2, 3}) {
        InverseSystem line = build_line(depth, Interval{Rational(0), Rational(2)}, 3);
        const LevelGraph& g = line.graph_at(depth);
        VertexId lo = kNoVertex, hi = kNoVertex;
        for (VertexId v = 0; v < g.vertex_count(); ++v) {
            if (g.height(v) == Rational(0)) lo = v;
            if (g.height(v) == Rational(2)) hi = v;
        }
        DbarEngine engine(line, depth);
        CHECK(engine.distance(SubPoint::at_vertex(lo), SubPoint::at_vertex(hi)) == Rational(2));
    }
}

TEST_CASE("path-metric comparison: line") {
    InverseSystem line = build_line(2, Interval{Rational(0), Rational(1)}, 3);
    auto rep = path_metric_comparison(line, 2);
    CHECK(rep.openness_ok);
    CHECK(rep.theta == 0);
    CHECK(rep.lower_ok);
    CHECK(rep.upper_ok);
    CHECK(rep.worst_upper == Rational(1));  // both metrics equal the height gap
}

TEST_CASE("path-metric comparison: split and diamond") {
    {
        InverseSystem sys = build_split(2);
        auto rep = path_metric_comparison(sys, 2);
        CHECK(rep.openness_ok);
        CHECK(rep.theta == 2);  // glued-copy fibers meet two hops below
        CHECK(rep.lower_ok);
        INFO("worst " << to_string(rep.worst_upper) << " at " << rep.worst_pair);
        CHECK(rep.upper_ok);
    }
    {
        InverseSystem sys = build_diamond(2);
        auto rep = path_metric_comparison(sys, 2);
        CHECK(rep.openness_ok);
        CHECK(rep.theta == 0);  // fibers over coarse vertices are singletons
        CHECK(rep.lower_ok);
        CHECK(rep.upper_ok);
    }
}
