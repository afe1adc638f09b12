#pragma once

#include "graph.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace l1weaver {

/// Simplicial projection of one level onto the subdivision of the previous
/// one. Every source vertex maps to a vertex of the target's subdivision
/// (a SubPoint of depth <= 1); every source edge maps isomorphically and
/// direction-preservingly onto one subdivision cell of a target edge.
struct Projection {
    std::vector<SubPoint> vertex_map;                        // per source vertex
    std::vector<std::pair<EdgeId, std::uint32_t>> edge_map;  // per source edge: (target edge, cell)
};

struct Interval {
    Rational lo, hi;
    bool contains(const Rational& x) const { return lo <= x && x <= hi; }
    Rational length() const { return hi - lo; }
};

/// The levelled family of directed metric graphs with its projections.
/// levels[k] lives at level first_level + k; projections[k] maps
/// levels[k+1] onto the subdivision of levels[k].
struct InverseSystem {
    int base = 2;
    int first_level = 0;
    Interval window;
    std::vector<LevelGraph> levels;
    std::vector<Projection> projections;

    int top_level() const { return first_level + static_cast<int>(levels.size()) - 1; }
    int index_of(int level) const {
        if (level < first_level || level > top_level())
            throw DomainError("level " + std::to_string(level) + " out of range");
        return level - first_level;
    }
    const LevelGraph& graph_at(int level) const { return levels[index_of(level)]; }
    /// Projection mapping level+1 onto the subdivision of `level`.
    const Projection& projection_down_to(int level) const {
        return projections[index_of(level)];
    }
};

/// One projection step: level l+1 point -> level l point (depth grows by <= 1).
inline SubPoint project_step(const InverseSystem& sys, int source_level, const SubPoint& p) {
    const Projection& pr = sys.projection_down_to(source_level - 1);
    const LevelGraph& target = sys.graph_at(source_level - 1);
    if (p.is_vertex()) return pr.vertex_map[p.vertex];
    auto [target_edge, cell] = pr.edge_map[p.edge];
    // p sits at num/m^depth inside its edge, which occupies cell
    // [cell, cell+1]/m of the target edge.
    std::uint64_t span = 1;
    for (int k = 0; k < p.depth; ++k) span *= static_cast<std::uint64_t>(sys.base);
    std::uint64_t num = static_cast<std::uint64_t>(cell) * span + p.num;
    return make_edge_point(target, target_edge, num, p.depth + 1);
}

/// pi_i^j: carries a level-j point down to level i (functorial composition of
/// the single steps). i == j is the identity.
inline SubPoint project(const InverseSystem& sys, int from_level, int to_level, SubPoint p) {
    if (to_level > from_level) throw DomainError("project: target level above source level");
    sys.index_of(from_level);
    sys.index_of(to_level);
    for (int l = from_level; l > to_level; --l) p = project_step(sys, l, p);
    return p;
}

struct Violation {
    int level = 0;
    std::string kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool admissible() const { return violations.empty(); }
    std::string summary() const {
        std::ostringstream os;
        if (admissible()) {
            os << "admissible";
        } else {
            os << violations.size() << " violation(s):";
            for (const auto& v : violations)
                os << "\n  [level " << v.level << "] " << v.kind << ": " << v.detail;
        }
        return os.str();
    }
};

/// Checks every structural requirement on the system. Violations are data,
/// not failures: an empty list means the system is admissible.
inline ValidationReport validate_admissible(const InverseSystem& sys) {
    ValidationReport rep;
    auto flag = [&](int level, std::string kind, std::string detail) {
        rep.violations.push_back(Violation{level, std::move(kind), std::move(detail)});
    };

    if (sys.levels.empty()) {
        flag(0, "empty-system", "no levels");
        return rep;
    }

    for (std::size_t k = 0; k < sys.levels.size(); ++k) {
        const LevelGraph& g = sys.levels[k];
        const int level = sys.first_level + static_cast<int>(k);
        if (g.base() != sys.base) flag(level, "base-mismatch", "level graph disagrees on m");
        if (g.level() != level) flag(level, "level-mismatch", "level label disagrees with position");
        if (!g.is_acyclic()) flag(level, "directed-cycle", "level graph has a directed cycle");
        const Rational len = g.edge_length();
        for (EdgeId e = 0; e < g.edge_count(); ++e) {
            const Edge& ed = g.edge(e);
            if (g.height(ed.head) - g.height(ed.tail) != len) {
                flag(level, "height-step",
                     "edge " + std::to_string(e) + " does not raise height by exactly m^-i");
                break;
            }
        }
    }

    if (sys.projections.size() + 1 != sys.levels.size()) {
        flag(sys.first_level, "projection-count", "need one projection per consecutive level pair");
        return rep;
    }

    for (std::size_t k = 0; k < sys.projections.size(); ++k) {
        const Projection& pr = sys.projections[k];
        const LevelGraph& src = sys.levels[k + 1];
        const LevelGraph& dst = sys.levels[k];
        const int level = sys.first_level + static_cast<int>(k) + 1;
        const int m = sys.base;
        if (pr.vertex_map.size() != src.vertex_count() || pr.edge_map.size() != src.edge_count()) {
            flag(level, "projection-shape", "vertex/edge map sizes disagree with the level graph");
            continue;
        }
        for (VertexId v = 0; v < src.vertex_count(); ++v) {
            const SubPoint& img = pr.vertex_map[v];
            if (!img.is_vertex() && img.depth != 1) {
                flag(level, "not-simplicial",
                     "vertex " + std::to_string(v) + " does not map to a subdivision vertex");
                continue;
            }
            if (subpoint_height(dst, img) != src.height(v))
                flag(level, "height-mismatch",
                     "vertex " + std::to_string(v) + " changes height under projection");
        }
        for (EdgeId e = 0; e < src.edge_count(); ++e) {
            auto [te, cell] = pr.edge_map[e];
            if (te >= dst.edge_count() || cell >= static_cast<std::uint32_t>(m)) {
                flag(level, "edge-image", "edge " + std::to_string(e) + " maps outside the target");
                continue;
            }
            const SubPoint want_tail = make_edge_point(dst, te, cell, 1);
            const SubPoint want_head = make_edge_point(dst, te, cell + 1, 1);
            const Edge& ed = src.edge(e);
            if (!(pr.vertex_map[ed.tail] == want_tail) || !(pr.vertex_map[ed.head] == want_head))
                flag(level, "edge-isomorphism",
                     "edge " + std::to_string(e) +
                         " does not map direction-preservingly onto one subdivision cell");
        }
    }

    // Level 0 must be connected (whole-system compatibility condition for a
    // connected truncation) and a disjoint union of directed paths outside the
    // window interior (the line collar).
    {
        const LevelGraph& g0 = sys.levels.front();
        const std::size_t n = g0.vertex_count();
        if (n > 0) {
            std::vector<char> seen(n, 0);
            std::vector<VertexId> stack{0};
            seen[0] = 1;
            std::size_t count = 1;
            while (!stack.empty()) {
                VertexId v = stack.back();
                stack.pop_back();
                auto visit = [&](VertexId w) {
                    if (!seen[w]) {
                        seen[w] = 1;
                        ++count;
                        stack.push_back(w);
                    }
                };
                for (EdgeId e : g0.out_edges(v)) visit(g0.edge(e).head);
                for (EdgeId e : g0.in_edges(v)) visit(g0.edge(e).tail);
            }
            if (count != n)
                flag(sys.first_level, "base-disconnected", "first level is not connected");
        }
        for (VertexId v = 0; v < n; ++v) {
            const Rational& h = g0.height(v);
            const bool inside = sys.window.lo < h && h < sys.window.hi;
            if (inside) continue;
            std::size_t out_here = 0, in_here = 0;
            for (EdgeId e : g0.out_edges(v)) {
                const Rational hh = g0.height(g0.edge(e).head);
                if (!(sys.window.lo < hh && hh < sys.window.hi)) ++out_here;
            }
            for (EdgeId e : g0.in_edges(v)) {
                const Rational ht = g0.height(g0.edge(e).tail);
                if (!(sys.window.lo < ht && ht < sys.window.hi)) ++in_here;
            }
            if (out_here > 1 || in_here > 1)
                flag(sys.first_level, "collar-not-a-line",
                     "vertex " + std::to_string(v) + " branches outside the window");
        }
    }
    return rep;
}

/// Vertices of X_i' (the once-subdivided level graph) in canonical order:
/// the coarse vertices first, then the interior subdivision points per edge.
inline std::vector<SubPoint> subdivision_vertices(const LevelGraph& g) {
    std::vector<SubPoint> pts;
    pts.reserve(g.vertex_count() + g.edge_count() * (g.base() - 1));
    for (VertexId v = 0; v < g.vertex_count(); ++v) pts.push_back(SubPoint::at_vertex(v));
    for (EdgeId e = 0; e < g.edge_count(); ++e)
        for (int j = 1; j < g.base(); ++j) pts.push_back(make_edge_point(g, e, j, 1));
    return pts;
}

}  // namespace l1weaver
