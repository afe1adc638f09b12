#pragma once

#include "system.hpp"

#include <array>
#include <string>
#include <vector>

namespace l1weaver {

/// Replacement graph for one coarse edge. Heights are in units of m^-(i+1):
/// the unique source sits at 0, the unique sink at `base`, and every edge
/// spans exactly one unit and declares the subdivision cell it projects onto.
struct GadgetSpec {
    struct GVertex {
        std::string name;
        int height_units = 0;
    };
    struct GEdge {
        int from = 0;
        int to = 0;
        int sub_index = 0;
    };
    int base = 2;
    std::vector<GVertex> vertices;
    std::vector<GEdge> edges;

    /// Subdivide-into-4 with the middle two cells doubled into two parallel
    /// 2-edge chains.
    static GadgetSpec laakso_diamond() {
        GadgetSpec g;
        g.base = 4;
        g.vertices = {{"v0", 0}, {"q1", 1}, {"a2", 2}, {"b2", 2}, {"q3", 3}, {"v4", 4}};
        g.edges = {{0, 1, 0}, {1, 2, 1}, {1, 3, 1}, {2, 4, 2}, {3, 4, 2}, {4, 5, 3}};
        return g;
    }

    /// The trivial replacement: a directed path of m edges (plain subdivision).
    static GadgetSpec plain_path(int m) {
        GadgetSpec g;
        g.base = m;
        for (int k = 0; k <= m; ++k)
            g.vertices.push_back({"p" + std::to_string(k), k});
        for (int k = 0; k < m; ++k) g.edges.push_back({k, k + 1, k});
        return g;
    }
};

/// Throws InputError naming the offending field when the gadget cannot serve
/// as an admissible edge replacement.
inline void validate_gadget(const GadgetSpec& g) {
    if (g.base < 2) throw InputError("gadget.base: must be >= 2");
    if (g.vertices.empty()) throw InputError("gadget.vertices: empty");
    int sources = 0, sinks = 0;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        const int h = g.vertices[i].height_units;
        if (h < 0 || h > g.base)
            throw InputError("gadget.vertices[" + std::to_string(i) + "].height: outside 0..m");
        if (h == 0) ++sources;
        if (h == g.base) ++sinks;
    }
    if (sources != 1) throw InputError("gadget.vertices: need exactly one source at height 0");
    if (sinks != 1) throw InputError("gadget.vertices: need exactly one sink at height m");
    std::vector<int> indeg(g.vertices.size(), 0), outdeg(g.vertices.size(), 0);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto& e = g.edges[i];
        if (e.from < 0 || e.to < 0 || e.from >= static_cast<int>(g.vertices.size()) ||
            e.to >= static_cast<int>(g.vertices.size()))
            throw InputError("gadget.edges[" + std::to_string(i) + "]: endpoint out of range");
        const int ht = g.vertices[e.from].height_units;
        const int hh = g.vertices[e.to].height_units;
        if (hh - ht != 1)
            throw InputError("gadget.edges[" + std::to_string(i) + "]: must span one height unit");
        if (e.sub_index != ht)
            throw InputError("gadget.edges[" + std::to_string(i) +
                             "].sub_index: inconsistent with heights");
        ++outdeg[e.from];
        ++indeg[e.to];
    }
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        const int h = g.vertices[i].height_units;
        if (h > 0 && indeg[i] == 0)
            throw InputError("gadget.vertices[" + std::to_string(i) + "]: unreachable (no in-edge)");
        if (h < g.base && outdeg[i] == 0)
            throw InputError("gadget.vertices[" + std::to_string(i) + "]: dead end (no out-edge)");
    }
}

namespace detail {

inline LevelGraph make_line_level0(const Rational& lo, const Rational& hi, int m) {
    if (!(lo < hi)) throw InputError("span: empty interval");
    if (!is_integer(hi - lo)) throw InputError("span: length must be an integer");
    LevelGraph g(0, m);
    BigInt len = numerator(hi - lo);
    VertexId prev = kNoVertex;
    for (BigInt k = 0; k <= len; ++k) {
        Rational h = lo + Rational(k);
        VertexId v = g.add_vertex(h, to_string(h));
        if (prev != kNoVertex) g.add_edge(prev, v);
        prev = v;
    }
    g.finalize();
    return g;
}

/// One refinement step of the two-copies-glued construction: subdivide, then
/// duplicate exactly the part that touches the closed window. Old vertices in
/// the window get two copies, new subdivision vertices in the window are
/// shared between the copies, the collar stays single.
inline LevelGraph step_glued_copies(const LevelGraph& g, const Interval& win, Projection& proj) {
    SubdivisionResult sub = subdivide_with_origin(g, 1);
    const LevelGraph& s = sub.graph;

    LevelGraph next(g.level() + 1, g.base());
    std::vector<std::array<VertexId, 2>> ids(s.vertex_count(), {kNoVertex, kNoVertex});
    proj.vertex_map.clear();
    proj.edge_map.clear();

    for (VertexId v = 0; v < s.vertex_count(); ++v) {
        const bool in_win = win.contains(s.height(v));
        const bool is_old = sub.vertex_origin[v].is_vertex();
        if (in_win && is_old) {
            ids[v][0] = next.add_vertex(s.height(v), s.label(v) + ".a");
            proj.vertex_map.push_back(sub.vertex_origin[v]);
            ids[v][1] = next.add_vertex(s.height(v), s.label(v) + ".b");
            proj.vertex_map.push_back(sub.vertex_origin[v]);
        } else {
            ids[v][0] = ids[v][1] = next.add_vertex(s.height(v), s.label(v));
            proj.vertex_map.push_back(sub.vertex_origin[v]);
        }
    }
    for (EdgeId e = 0; e < s.edge_count(); ++e) {
        const Edge& ed = s.edge(e);
        const bool touches = s.height(ed.head) >= win.lo && s.height(ed.tail) <= win.hi;
        if (touches) {
            for (int j = 0; j < 2; ++j) {
                next.add_edge(ids[ed.tail][j], ids[ed.head][j]);
                proj.edge_map.push_back(sub.edge_origin[e]);
            }
        } else {
            next.add_edge(ids[ed.tail][0], ids[ed.head][0]);
            proj.edge_map.push_back(sub.edge_origin[e]);
        }
    }
    next.finalize();
    return next;
}

/// One refinement step of the edge-replacement construction: every edge whose
/// closed span lies in the window becomes a copy of the gadget, every other
/// edge is plainly subdivided. Replacement shares the edge endpoints.
inline LevelGraph step_replace_edges(const LevelGraph& g, const Interval& win,
                                     const GadgetSpec& gadget, Projection& proj) {
    const int m = gadget.base;
    const GadgetSpec path = GadgetSpec::plain_path(m);
    LevelGraph next(g.level() + 1, m);
    proj.vertex_map.clear();
    proj.edge_map.clear();

    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        next.add_vertex(g.height(v), g.label(v));
        proj.vertex_map.push_back(SubPoint::at_vertex(v));
    }
    const Rational unit = g.edge_length() / m;
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const Edge& ed = g.edge(e);
        const bool in_win = g.height(ed.tail) >= win.lo && g.height(ed.head) <= win.hi;
        const GadgetSpec& spec = in_win ? gadget : path;
        std::vector<VertexId> local(spec.vertices.size(), kNoVertex);
        for (std::size_t i = 0; i < spec.vertices.size(); ++i) {
            const int units = spec.vertices[i].height_units;
            if (units == 0) {
                local[i] = ed.tail;
            } else if (units == m) {
                local[i] = ed.head;
            } else {
                local[i] = next.add_vertex(g.height(ed.tail) + Rational(units) * unit,
                                           "e" + std::to_string(e) + "." + spec.vertices[i].name);
                proj.vertex_map.push_back(make_edge_point(g, e, units, 1));
            }
        }
        for (const auto& ge : spec.edges) {
            next.add_edge(local[ge.from], local[ge.to]);
            proj.edge_map.push_back({e, static_cast<std::uint32_t>(ge.sub_index)});
        }
    }
    next.finalize();
    return next;
}

inline int require_integer_collar(const Rational& collar) {
    if (!is_integer(collar) || collar < 1)
        throw InputError("collar: must be a positive integer (level-0 edges have length 1)");
    return static_cast<int>(numerator(collar).convert_to<long>());
}

}  // namespace detail

/// Every level is the iterated subdivision of the line over `span`.
inline InverseSystem build_line(int depth, Interval span, int base = 3) {
    if (depth < 0) throw InputError("depth: must be >= 0");
    InverseSystem sys;
    sys.base = base;
    sys.window = span;
    sys.levels.push_back(detail::make_line_level0(span.lo, span.hi, base));
    for (int i = 0; i < depth; ++i) {
        SubdivisionResult sub = subdivide_with_origin(sys.levels.back(), 1);
        Projection pr;
        pr.vertex_map = std::move(sub.vertex_origin);
        pr.edge_map = std::move(sub.edge_origin);
        sys.levels.push_back(std::move(sub.graph));
        sys.projections.push_back(std::move(pr));
    }
    return sys;
}

/// Two copies of the trisected previous level glued along the new trisection
/// vertices over the window [0,1], with a line collar on both sides.
inline InverseSystem build_split(int depth, const Rational& collar = Rational(1)) {
    if (depth < 0) throw InputError("depth: must be >= 0");
    const int c = detail::require_integer_collar(collar);
    InverseSystem sys;
    sys.base = 3;
    sys.window = Interval{Rational(0), Rational(1)};
    sys.levels.push_back(detail::make_line_level0(Rational(-c), Rational(1 + c), 3));
    for (int i = 0; i < depth; ++i) {
        Projection pr;
        sys.levels.push_back(detail::step_glued_copies(sys.levels.back(), sys.window, pr));
        sys.projections.push_back(std::move(pr));
    }
    return sys;
}

/// Every window edge replaced by the gadget, collar edges plainly subdivided.
inline InverseSystem build_diamond(int depth, const Rational& collar = Rational(1),
                                   const GadgetSpec& gadget = GadgetSpec::laakso_diamond()) {
    if (depth < 0) throw InputError("depth: must be >= 0");
    validate_gadget(gadget);
    const int c = detail::require_integer_collar(collar);
    InverseSystem sys;
    sys.base = gadget.base;
    sys.window = Interval{Rational(0), Rational(1)};
    sys.levels.push_back(detail::make_line_level0(Rational(-c), Rational(1 + c), gadget.base));
    for (int i = 0; i < depth; ++i) {
        Projection pr;
        sys.levels.push_back(detail::step_replace_edges(sys.levels.back(), sys.window, gadget, pr));
        sys.projections.push_back(std::move(pr));
    }
    return sys;
}

}  // namespace l1weaver
