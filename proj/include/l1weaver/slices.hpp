#pragma once

#include "system.hpp"

#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace l1weaver {

/// Side of a point against a slice: Leq when the point lies on or below the
/// slice, Gt when some slice element lies strictly below the point.
enum class Side : std::uint8_t { Leq, Gt };

/// An antichain of subdivision vertices (elements are SubPoints of depth <= 1,
/// i.e. vertices of X_level'), canonically sorted. A *slice* additionally
/// meets every maximal directed path exactly once; parent type for both.
struct PartialSlice {
    int level = 0;
    std::vector<SubPoint> elements;  // sorted by SubPoint::key, no duplicates

    bool operator==(const PartialSlice& o) const {
        return level == o.level && elements == o.elements;
    }
};

inline PartialSlice make_partial_slice(int level, std::vector<SubPoint> elems) {
    std::sort(elems.begin(), elems.end());
    for (std::size_t i = 1; i < elems.size(); ++i)
        if (elems[i] == elems[i - 1]) throw DomainError("slice elements must be distinct");
    return PartialSlice{level, std::move(elems)};
}

struct PartialSliceHash {
    std::size_t operator()(const PartialSlice& s) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(s.level);
        for (const SubPoint& p : s.elements) {
            h ^= p.key() + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

/// Finitely supported measure on slices of one level, exact rational masses.
/// `seeds` records which first-level singletons the measure was diffused
/// from, so queries can check window sufficiency.
struct SliceMeasure {
    int level = 0;
    std::unordered_map<PartialSlice, Rational, PartialSliceHash> support;
    std::vector<SubPoint> seeds;

    Rational total_mass() const {
        Rational t(0);
        for (const auto& [s, w] : support) t += w;
        return t;
    }
    /// Mass of the slices containing the given subdivision vertex.
    Rational marginal(const SubPoint& p) const {
        Rational t(0);
        for (const auto& [s, w] : support)
            for (const SubPoint& e : s.elements)
                if (e == p) {
                    t += w;
                    break;
                }
        return t;
    }
};

inline bool is_partial_slice(const LevelGraph& g, const PartialSlice& s) {
    for (std::size_t i = 0; i < s.elements.size(); ++i)
        for (std::size_t j = 0; j < s.elements.size(); ++j)
            if (i != j && precedes(g, s.elements[i], s.elements[j])) return false;
    return true;
}

/// Full-slice validator (enumerates maximal paths; intended for small levels).
inline bool is_slice(const LevelGraph& g, const PartialSlice& s,
                     std::size_t path_limit = 1u << 20) {
    if (!is_partial_slice(g, s)) return false;
    for (const DirectedPath& path : maximal_directed_paths(g, path_limit)) {
        int hits = 0;
        for (const SubPoint& e : s.elements)
            if (path_contains(g, path, e)) ++hits;
        if (hits != 1) return false;
    }
    return true;
}

/// Children of a coarse vertex: type (1) keeps {v}; type (2) picks one
/// interior subdivision point on every outgoing edge; type (3) symmetrically
/// on incoming edges. Masses: 1/m for type (1) and (m-1)/(2m) split uniformly
/// within each of types (2) and (3). Requires both edge directions present.
inline std::vector<std::pair<PartialSlice, Rational>> children_of_vertex(const InverseSystem& sys,
                                                                         int level, VertexId v) {
    const LevelGraph& g = sys.graph_at(level);
    const int m = sys.base;
    const auto& out = g.out_edges(v);
    const auto& in = g.in_edges(v);
    if (out.empty() || in.empty())
        throw DomainError("children_of_vertex: vertex '" + g.label(v) +
                          "' at level " + std::to_string(level) +
                          " lacks incoming or outgoing edges (outside the safe region)");

    std::vector<std::pair<PartialSlice, Rational>> children;
    children.push_back({make_partial_slice(level, {SubPoint::at_vertex(v)}), Rational(1, m)});

    auto emit_family = [&](const std::vector<EdgeId>& edges) {
        Rational per = Rational(m - 1, 2 * m);
        for (std::size_t k = 0; k < edges.size(); ++k) per /= (m - 1);
        std::vector<int> pick(edges.size(), 1);
        while (true) {
            std::vector<SubPoint> elems;
            elems.reserve(edges.size());
            for (std::size_t i = 0; i < edges.size(); ++i)
                elems.push_back(make_edge_point(g, edges[i], pick[i], 1));
            children.push_back({make_partial_slice(level, std::move(elems)), per});
            // Lexicographic odometer over the per-edge picks.
            std::size_t i = 0;
            for (; i < pick.size(); ++i) {
                if (pick[i] < m - 1) {
                    ++pick[i];
                    for (std::size_t j = 0; j < i; ++j) pick[j] = 1;
                    break;
                }
            }
            if (i == pick.size()) break;
        }
    };
    emit_family(out);
    emit_family(in);
    return children;
}

/// Vertices of the next level projecting into the slice (the local
/// modification sites).
inline std::vector<VertexId> preimage_vertices(const InverseSystem& sys, const PartialSlice& s) {
    const Projection& pr = sys.projection_down_to(s.level);
    const LevelGraph& up = sys.graph_at(s.level + 1);
    std::unordered_set<std::uint64_t> keys;
    for (const SubPoint& e : s.elements) keys.insert(e.key());
    std::vector<VertexId> out;
    for (VertexId w = 0; w < up.vertex_count(); ++w)
        if (keys.count(pr.vertex_map[w].key())) out.push_back(w);
    return out;
}

/// Streams the children of a slice: one child of every preimage vertex,
/// unioned, with the product mass. Children of distinct choice tuples are
/// distinct (their trimmed stars are disjoint).
template <typename Fn>
void for_each_child_of_slice(const InverseSystem& sys, const PartialSlice& s, Fn&& fn) {
    const int next = s.level + 1;
    std::vector<VertexId> pre = preimage_vertices(sys, s);
    if (pre.empty()) throw DomainError("slice has an empty preimage; system truncated too early");
    std::vector<std::vector<std::pair<PartialSlice, Rational>>> menus;
    menus.reserve(pre.size());
    for (VertexId w : pre) menus.push_back(children_of_vertex(sys, next, w));

    std::vector<std::size_t> idx(menus.size(), 0);
    while (true) {
        std::vector<SubPoint> elems;
        Rational mass(1);
        for (std::size_t i = 0; i < menus.size(); ++i) {
            const auto& [piece, w] = menus[i][idx[i]];
            elems.insert(elems.end(), piece.elements.begin(), piece.elements.end());
            mass *= w;
        }
        fn(make_partial_slice(next, std::move(elems)), mass);
        std::size_t i = 0;
        for (; i < idx.size(); ++i) {
            if (idx[i] + 1 < menus[i].size()) {
                ++idx[i];
                for (std::size_t j = 0; j < i; ++j) idx[j] = 0;
                break;
            }
        }
        if (i == idx.size()) break;
    }
}

inline SliceMeasure children_of_slice(const InverseSystem& sys, const PartialSlice& s) {
    SliceMeasure out;
    out.level = s.level + 1;
    for_each_child_of_slice(sys, s,
                            [&](PartialSlice child, Rational w) { out.support[child] += w; });
    return out;
}

inline constexpr std::size_t kDefaultSupportLimit = 500000;

/// One diffusion step: pushes every supported slice onto its children and
/// accumulates masses (children arising from several parents merge by
/// addition). Total mass is preserved exactly.
inline SliceMeasure diffuse(const InverseSystem& sys, const SliceMeasure& mu,
                            std::size_t support_limit = kDefaultSupportLimit) {
    SliceMeasure out;
    out.level = mu.level + 1;
    out.seeds = mu.seeds;
    if (mu.level + 1 > sys.top_level())
        throw DomainError("diffuse: no level " + std::to_string(mu.level + 1) + " in the system");
    for (const auto& [s, w] : mu.support) {
        for_each_child_of_slice(sys, s, [&](PartialSlice child, Rational cw) {
            out.support[child] += w * cw;
        });
        if (out.support.size() > support_limit)
            throw DomainError(
                "diffuse: support exceeds " + std::to_string(support_limit) +
                " slices; use the exact per-query calculus or the descendant sampler");
    }
    return out;
}

/// First-level subdivision vertices whose open star meets the window and
/// whose diffusion can always proceed: descendant slices live over the
/// seed's open star, so every deeper vertex there must carry both edge
/// directions and every subdivision vertex there must have a nonempty fiber
/// one level further down (truncated systems need not cover the same height
/// range at every level).
inline std::vector<SubPoint> default_seeds(const InverseSystem& sys) {
    const LevelGraph& g0 = sys.levels.front();
    const Rational step = g0.edge_length() / sys.base;
    const std::size_t nlev = sys.levels.size();

    // Per level: the subdivision points over the seed-candidate region with
    // their level-0 projections, whether their fiber below is nonempty, and
    // (for coarse vertices) whether both edge directions exist.
    struct Mark {
        SubPoint down;      // level-0 projection
        bool fiber = true;  // nonempty fiber at the next level
        bool edges = true;  // both directions present (coarse vertices only)
    };
    std::vector<std::vector<Mark>> marks(nlev);
    for (std::size_t k = 0; k < nlev; ++k) {
        const LevelGraph& g = sys.levels[k];
        const int lvl = sys.first_level + static_cast<int>(k);
        std::unordered_set<std::uint64_t> images;
        if (k + 1 < nlev)
            for (const SubPoint& img : sys.projections[k].vertex_map) images.insert(img.key());
        for (const SubPoint& e : subdivision_vertices(g)) {
            Mark m;
            m.down = project(sys, lvl, sys.first_level, e);
            if (k + 1 < nlev) m.fiber = images.count(e.key()) > 0;
            if (e.is_vertex())
                m.edges = !g.in_edges(e.vertex).empty() && !g.out_edges(e.vertex).empty();
            marks[k].push_back(m);
        }
    }

    std::vector<SubPoint> seeds;
    for (const SubPoint& p : subdivision_vertices(g0)) {
        const Rational h = subpoint_height(g0, p);
        if (!(h - step < sys.window.hi && h + step > sys.window.lo)) continue;
        bool ok = true;
        for (std::size_t k = 0; k < nlev && ok; ++k) {
            const bool need_children = k >= 1;       // diffusion sites live at levels >= 1
            const bool need_fiber = k + 1 < nlev;    // elements must project upward
            for (const Mark& m : marks[k]) {
                if (!in_open_star_prime(g0, p, m.down)) continue;
                if (need_fiber && !m.fiber) ok = false;
                if (need_children && !m.edges) ok = false;
                if (!ok) break;
            }
        }
        // The seed's own sites sit exactly over p; they must exist below.
        if (ok && nlev == 1) {
            Rational hmin = g0.height(0), hmax = g0.height(0);
            for (VertexId v = 1; v < g0.vertex_count(); ++v) {
                hmin = std::min(hmin, g0.height(v));
                hmax = std::max(hmax, g0.height(v));
            }
            ok = h - step >= hmin && h + step <= hmax;
        }
        if (ok) seeds.push_back(p);
    }
    std::sort(seeds.begin(), seeds.end());
    return seeds;
}

/// Window sufficiency: every first-level subdivision vertex whose open star
/// could carry slice mass near the point must be seeded; otherwise the
/// measure seen by the point is silently truncated and queries refuse.
inline bool point_safe(const InverseSystem& sys, const std::vector<SubPoint>& seeds, int level,
                       const SubPoint& p) {
    std::unordered_set<std::uint64_t> seed_keys;
    for (const SubPoint& s : seeds) seed_keys.insert(s.key());
    const LevelGraph& g0 = sys.levels.front();
    SubPoint p0 = project(sys, level, sys.first_level, p);
    std::vector<SubPoint> covering;
    if (p0.is_vertex() || p0.depth <= 1) {
        covering.push_back(p0);
    } else {
        std::uint64_t span = 1;
        for (int k = 1; k < p0.depth; ++k) span *= static_cast<std::uint64_t>(sys.base);
        const std::uint64_t cell = p0.num / span;  // depth-1 cell containing the point
        covering.push_back(make_edge_point(g0, p0.edge, cell, 1));
        covering.push_back(make_edge_point(g0, p0.edge, cell + 1, 1));
    }
    for (const SubPoint& c : covering)
        if (!seed_keys.count(c.key())) return false;
    return true;
}

/// The diffused slice measure at `target_level`: mass m^-(first_level+1) on
/// each seeded singleton, then one diffusion step per level. Exhaustive;
/// throws when the support outgrows `support_limit`.
inline SliceMeasure sigma_prime(const InverseSystem& sys, int target_level,
                                std::vector<SubPoint> seeds = {},
                                std::size_t support_limit = kDefaultSupportLimit) {
    sys.index_of(target_level);
    if (seeds.empty()) seeds = default_seeds(sys);
    SliceMeasure mu;
    mu.level = sys.first_level;
    mu.seeds = seeds;
    const Rational w0 = rational_pow(sys.base, -(sys.first_level + 1));
    for (const SubPoint& s : seeds) {
        if (!(s.is_vertex() || s.depth == 1))
            throw DomainError("seeds must be first-level subdivision vertices");
        mu.support[make_partial_slice(sys.first_level, {s})] = w0;
    }
    while (mu.level < target_level) mu = diffuse(sys, mu, support_limit);
    return mu;
}

/// One draw from the descendant distribution of S at `target_level`;
/// deterministic for a fixed seed (custom rejection sampling, no
/// platform-dependent distributions).
inline PartialSlice sample_descendant(const InverseSystem& sys, const PartialSlice& start,
                                      int target_level, std::uint64_t rng_seed) {
    if (target_level < start.level)
        throw DomainError("sample_descendant: target level above the slice");
    std::mt19937_64 rng(rng_seed);
    auto uniform_below = [&](std::uint64_t bound) {
        // Rejection sampling for an exactly uniform draw in [0, bound).
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        return r % bound;
    };

    PartialSlice cur = start;
    while (cur.level < target_level) {
        std::vector<SubPoint> elems;
        for (VertexId w : preimage_vertices(sys, cur)) {
            auto menu = children_of_vertex(sys, cur.level + 1, w);
            // Exact discrete sampling over the common denominator.
            BigInt denom(1);
            for (const auto& [piece, mass] : menu) denom = lcm(denom, denominator(mass));
            const std::uint64_t d = denom.convert_to<std::uint64_t>();
            std::uint64_t r = uniform_below(d);
            for (const auto& [piece, mass] : menu) {
                const std::uint64_t ticket =
                    (numerator(mass) * (denom / denominator(mass))).convert_to<std::uint64_t>();
                if (r < ticket) {
                    elems.insert(elems.end(), piece.elements.begin(), piece.elements.end());
                    break;
                }
                r -= ticket;
            }
        }
        cur = make_partial_slice(cur.level + 1, std::move(elems));
    }
    return cur;
}

}  // namespace l1weaver
