#pragma once

#include "metrics.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace l1weaver {

/// A finite metric space with an exact distance matrix and a real-valued
/// 1-Lipschitz function given by exact rationals.
struct FiniteMetricSpace {
    std::vector<std::string> ids;
    std::vector<std::vector<Rational>> dist;
    std::vector<Rational> u;

    std::size_t size() const { return ids.size(); }
};

inline void validate_metric_space(const FiniteMetricSpace& x) {
    const std::size_t n = x.size();
    if (x.dist.size() != n || x.u.size() != n)
        throw InputError("metric space: ids, matrix and u sizes disagree");
    for (std::size_t i = 0; i < n; ++i) {
        if (x.dist[i].size() != n) throw InputError("metric space: matrix is not square");
        if (x.dist[i][i] != Rational(0))
            throw InputError("metric space: nonzero diagonal at " + x.ids[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (x.dist[i][j] != x.dist[j][i])
                throw InputError("metric space: asymmetric at " + x.ids[i] + "," + x.ids[j]);
            if (i != j && !(x.dist[i][j] > Rational(0)))
                throw InputError("metric space: nonpositive distance at " + x.ids[i] + "," +
                                 x.ids[j]);
            const Rational gap = x.u[i] > x.u[j] ? x.u[i] - x.u[j] : x.u[j] - x.u[i];
            if (gap > x.dist[i][j])
                throw InputError("u is not 1-Lipschitz at pair " + x.ids[i] + "," + x.ids[j]);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                if (x.dist[i][j] > x.dist[i][k] + x.dist[k][j])
                    throw InputError("triangle inequality fails at " + x.ids[i] + "," + x.ids[j] +
                                     "," + x.ids[k]);
}

/// delta-components of the given subset: the classes of chains with steps of
/// length <= delta. Blocks are canonically sorted.
inline std::vector<std::vector<std::size_t>> delta_components(const FiniteMetricSpace& x,
                                                              const std::vector<std::size_t>& subset,
                                                              const Rational& delta) {
    if (!(delta > Rational(0))) throw DomainError("delta_components: delta must be positive");
    std::vector<std::size_t> parent(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < subset.size(); ++i)
        for (std::size_t j = i + 1; j < subset.size(); ++j)
            if (x.dist[subset[i]][subset[j]] <= delta) parent[find(i)] = find(j);
    std::map<std::size_t, std::vector<std::size_t>> blocks;
    for (std::size_t i = 0; i < subset.size(); ++i) blocks[find(i)].push_back(subset[i]);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [root, members] : blocks) {
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct LipschitzLightSpaceReport {
    Rational worst_ratio;  // component diameter / interval diameter
    Rational c_bound;
    bool pass = true;
    std::string worst_interval;
};

/// Checks the map hypothesis over grid stars at scales m^-i_lo .. m^-i_hi:
/// diam(I)-components of u-preimages must have diameter <= C * diam(I).
inline LipschitzLightSpaceReport lipschitz_light_check(const FiniteMetricSpace& x,
                                                       const Rational& c_bound, int m, int i_lo,
                                                       int i_hi) {
    validate_metric_space(x);
    LipschitzLightSpaceReport rep;
    rep.c_bound = c_bound;
    rep.worst_ratio = Rational(0);
    if (x.size() == 0) return rep;
    Rational umin = x.u[0], umax = x.u[0];
    for (const Rational& v : x.u) {
        umin = std::min(umin, v);
        umax = std::max(umax, v);
    }
    for (int i = i_lo; i <= i_hi; ++i) {
        const Rational step = rational_pow(m, -i);
        for (BigInt k = rational_floor(umin / step); k <= rational_ceil(umax / step); ++k) {
            const Rational lo = Rational(k) * step - step;
            const Rational hi = Rational(k) * step + step;
            std::vector<std::size_t> subset;
            for (std::size_t z = 0; z < x.size(); ++z)
                if (lo <= x.u[z] && x.u[z] <= hi) subset.push_back(z);
            if (subset.size() < 2) continue;
            for (const auto& block : delta_components(x, subset, 2 * step)) {
                Rational diam(0);
                for (std::size_t a = 0; a < block.size(); ++a)
                    for (std::size_t b = a + 1; b < block.size(); ++b)
                        diam = std::max(diam, x.dist[block[a]][block[b]]);
                const Rational ratio = diam / (2 * step);
                if (ratio > rep.worst_ratio) {
                    rep.worst_ratio = ratio;
                    rep.worst_interval = "[" + to_string(lo) + "," + to_string(hi) + "]";
                }
            }
        }
    }
    rep.pass = rep.worst_ratio <= c_bound;
    return rep;
}

/// The realization of (X, u) as an inverse system together with the
/// compatible point maps and the measured distortion of the top-level map.
struct Factorization {
    InverseSystem system;
    std::vector<std::vector<GraphPoint>> maps;  // [level index][point]
    Rational distortion;                        // L': max of both ratio suprema
};

struct FactorizationReport {
    bool compatible = false;     // projections commute with the maps, exactly
    bool height_identity = false;  // heights of images reproduce u, exactly
    bool star_property = false;  // close pairs land in a common closed star
    bool finite = false;         // the top-level map separates distinct points
    Rational lprime;
    Rational sup_dist_over_dbar, sup_dbar_over_dist;
};

namespace detail {

/// floor(a/b) for exact integers, rounding toward -infinity.
inline BigInt floor_div(const BigInt& a, const BigInt& b) {
    BigInt q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace detail

/// Builds the admissible inverse system of grid-star components for levels
/// i_min..i_max and places each point on the edge over its u value.
inline Factorization factorize(const FiniteMetricSpace& x, int m, int i_min, int i_max) {
    validate_metric_space(x);
    if (m < 2) throw InputError("factorize: m must be >= 2");
    if (i_min > i_max) throw InputError("factorize: empty level range");
    if (x.size() == 0) throw InputError("factorize: empty space");

    Factorization fac;
    fac.system.base = m;
    fac.system.first_level = i_min;

    struct SlotVertex {
        std::vector<std::size_t> member;  // sorted point indices
        VertexId id;
    };
    // Per level: slot index (exact integer) -> vertices over that grid slot.
    std::vector<std::map<BigInt, std::vector<SlotVertex>>> slots(i_max - i_min + 1);

    Rational umin = x.u[0], umax = x.u[0];
    for (const Rational& v : x.u) {
        umin = std::min(umin, v);
        umax = std::max(umax, v);
    }

    for (int lvl = i_min; lvl <= i_max; ++lvl) {
        const int li = lvl - i_min;
        const Rational step = rational_pow(m, -lvl);
        LevelGraph g(lvl, m);
        for (BigInt k = rational_floor(umin / step) - 1; k <= rational_ceil(umax / step) + 1;
             ++k) {
            const Rational v = Rational(k) * step;
            std::vector<std::size_t> subset;
            for (std::size_t z = 0; z < x.size(); ++z)
                if (v - step <= x.u[z] && x.u[z] <= v + step) subset.push_back(z);
            if (subset.empty()) continue;
            auto blocks = delta_components(x, subset, step);
            std::vector<SlotVertex> here;
            for (std::size_t c = 0; c < blocks.size(); ++c) {
                SlotVertex sv;
                sv.member = blocks[c];
                sv.id = g.add_vertex(v, "g" + k.str() + "." + std::to_string(c));
                here.push_back(std::move(sv));
            }
            slots[li][k] = std::move(here);
        }
        // Edges between consecutive slots with intersecting components.
        for (auto& [k, lower] : slots[li]) {
            auto up = slots[li].find(k + 1);
            if (up == slots[li].end()) continue;
            for (const SlotVertex& a : lower)
                for (const SlotVertex& b : up->second) {
                    bool meet = false;
                    std::size_t i = 0, j = 0;
                    while (i < a.member.size() && j < b.member.size()) {
                        if (a.member[i] == b.member[j]) {
                            meet = true;
                            break;
                        }
                        (a.member[i] < b.member[j]) ? ++i : ++j;
                    }
                    if (meet) g.add_edge(a.id, b.id);
                }
        }
        g.finalize();
        fac.system.levels.push_back(std::move(g));
    }

    // The whole covered height range counts as the window; the boundary slots
    // carry no branching, so the collar condition is vacuous.
    {
        const LevelGraph& g0 = fac.system.levels.front();
        Rational lo = g0.height(0), hi = g0.height(0);
        for (VertexId v = 1; v < g0.vertex_count(); ++v) {
            lo = std::min(lo, g0.height(v));
            hi = std::max(hi, g0.height(v));
        }
        fac.system.window = Interval{lo, hi};
    }

    auto vertex_over = [&](int li, const BigInt& k, std::size_t point) -> const SlotVertex& {
        auto it = slots[li].find(k);
        if (it == slots[li].end()) throw Error("factorize: missing grid slot");
        for (const SlotVertex& sv : it->second)
            for (std::size_t z : sv.member)
                if (z == point) return sv;
        throw Error("factorize: point not covered by its grid slot");
    };

    // Projections: each finer vertex sits at offset r/m inside the coarser
    // cell between its two covering components (which always span an edge).
    for (int lvl = i_min; lvl < i_max; ++lvl) {
        const int li = lvl - i_min;
        const LevelGraph& fine = fac.system.levels[li + 1];
        const LevelGraph& coarse = fac.system.levels[li];
        Projection pr;
        pr.vertex_map.resize(fine.vertex_count());
        std::map<std::pair<VertexId, VertexId>, EdgeId> coarse_edge;
        for (EdgeId e = 0; e < coarse.edge_count(); ++e)
            coarse_edge[{coarse.edge(e).tail, coarse.edge(e).head}] = e;

        for (auto& [khat, fine_here] : slots[li + 1]) {
            const BigInt kdown = detail::floor_div(khat, m);
            const long r = (khat - kdown * m).convert_to<long>();
            for (const SlotVertex& sv : fine_here) {
                const std::size_t z = sv.member.front();
                if (r == 0) {
                    pr.vertex_map[sv.id] = SubPoint::at_vertex(vertex_over(li, kdown, z).id);
                } else {
                    const VertexId a = vertex_over(li, kdown, z).id;
                    const VertexId b = vertex_over(li, kdown + 1, z).id;
                    auto it = coarse_edge.find({a, b});
                    if (it == coarse_edge.end())
                        throw Error("factorize: covering components do not span an edge");
                    pr.vertex_map[sv.id] = make_edge_point(coarse, it->second,
                                                           static_cast<std::uint64_t>(r), 1);
                }
            }
        }
        // Edge images derived from the endpoint images.
        pr.edge_map.resize(fine.edge_count());
        for (EdgeId e = 0; e < fine.edge_count(); ++e) {
            const SubPoint& ta = pr.vertex_map[fine.edge(e).tail];
            const SubPoint& he = pr.vertex_map[fine.edge(e).head];
            if (!ta.is_vertex()) {
                pr.edge_map[e] = {ta.edge, ta.num};
            } else if (!he.is_vertex()) {
                pr.edge_map[e] = {he.edge, he.num - 1};
            } else {
                throw Error("factorize: an edge with both endpoint images at coarse vertices");
            }
        }
        fac.system.projections.push_back(std::move(pr));
    }

    auto report = validate_admissible(fac.system);
    if (!report.admissible())
        throw DomainError("factorize: output system is not admissible: " + report.summary());

    // Point maps: z lands over u(z) on the edge spanned by its components.
    for (int lvl = i_min; lvl <= i_max; ++lvl) {
        const int li = lvl - i_min;
        const LevelGraph& g = fac.system.levels[li];
        const Rational step = rational_pow(m, -lvl);
        std::map<std::pair<VertexId, VertexId>, EdgeId> edge_of;
        for (EdgeId e = 0; e < g.edge_count(); ++e)
            edge_of[{g.edge(e).tail, g.edge(e).head}] = e;
        std::vector<GraphPoint> row;
        for (std::size_t z = 0; z < x.size(); ++z) {
            const Rational t = x.u[z] / step;
            const BigInt k = rational_floor(t);
            const Rational fracpos = t - Rational(k);
            if (fracpos == Rational(0)) {
                row.push_back(GraphPoint::of_vertex(vertex_over(li, k, z).id));
            } else {
                const VertexId a = vertex_over(li, k, z).id;
                const VertexId b = vertex_over(li, k + 1, z).id;
                auto it = edge_of.find({a, b});
                if (it == edge_of.end()) throw Error("factorize: point edge missing");
                row.push_back(GraphPoint::on_edge(g, it->second, fracpos));
            }
        }
        fac.maps.push_back(std::move(row));
    }
    return fac;
}

inline FactorizationReport verify_factorization(const Factorization& fac,
                                                const FiniteMetricSpace& x);

/// factorize + verify in one call, with the measured distortion stored.
inline Factorization factorize_verified(const FiniteMetricSpace& x, int m, int i_min, int i_max) {
    Factorization fac = factorize(x, m, i_min, i_max);
    fac.distortion = verify_factorization(fac, x).lprime;
    return fac;
}

/// Exact compatibility, the height identity, the closed-star property for
/// close pairs, and the measured bilipschitz constants of the top map.
inline FactorizationReport verify_factorization(const Factorization& fac,
                                                const FiniteMetricSpace& x) {
    FactorizationReport rep;
    const InverseSystem& sys = fac.system;
    const int i_min = sys.first_level, i_max = sys.top_level();

    rep.compatible = true;
    for (int lvl = i_min; lvl < i_max; ++lvl)
        for (std::size_t z = 0; z < x.size(); ++z) {
            GraphPoint down = graph_point_step(sys, lvl + 1, fac.maps[lvl + 1 - i_min][z]);
            if (!(down == fac.maps[lvl - i_min][z])) rep.compatible = false;
        }

    rep.height_identity = true;
    for (int lvl = i_min; lvl <= i_max; ++lvl)
        for (std::size_t z = 0; z < x.size(); ++z)
            if (graph_point_height(sys.graph_at(lvl), fac.maps[lvl - i_min][z]) != x.u[z])
                rep.height_identity = false;

    rep.star_property = true;
    for (int lvl = i_min; lvl <= i_max; ++lvl) {
        const LevelGraph& g = sys.graph_at(lvl);
        const Rational step = rational_pow(sys.base, -lvl);
        for (std::size_t a = 0; a < x.size(); ++a)
            for (std::size_t b = a + 1; b < x.size(); ++b) {
                if (x.dist[a][b] > step) continue;
                const GraphPoint& pa = fac.maps[lvl - i_min][a];
                const GraphPoint& pb = fac.maps[lvl - i_min][b];
                bool shared = false;
                auto candidates = [&](const GraphPoint& p) {
                    std::vector<VertexId> c;
                    if (p.at_vertex) {
                        c.push_back(p.vertex);
                        for (EdgeId e : g.out_edges(p.vertex)) c.push_back(g.edge(e).head);
                        for (EdgeId e : g.in_edges(p.vertex)) c.push_back(g.edge(e).tail);
                    } else {
                        c.push_back(g.edge(p.edge).tail);
                        c.push_back(g.edge(p.edge).head);
                    }
                    return c;
                };
                for (VertexId v : candidates(pa))
                    if (in_closed_star_gp(g, pb, v)) shared = true;
                if (!shared) rep.star_property = false;
            }
    }

    DbarEngine engine(sys, i_max);
    rep.finite = true;
    Rational up(0), down(0);
    for (std::size_t a = 0; a < x.size(); ++a)
        for (std::size_t b = a + 1; b < x.size(); ++b) {
            const Rational dd =
                engine.distance_point(fac.maps[i_max - i_min][a], fac.maps[i_max - i_min][b]);
            if (dd == Rational(0)) {
                rep.finite = false;
                continue;
            }
            up = std::max(up, x.dist[a][b] / dd);
            down = std::max(down, dd / x.dist[a][b]);
        }
    rep.sup_dist_over_dbar = up;
    rep.sup_dbar_over_dist = down;
    rep.lprime = std::max(up, down);
    return rep;
}

}  // namespace l1weaver
