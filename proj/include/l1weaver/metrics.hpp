#pragma once

#include "parallel.hpp"
#include "system.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace l1weaver {

/// Exact shortest-path length in the undirected metric graph (every edge
/// linearly isometric to [0, m^-level]); nullopt when the points lie in
/// different connected components.
inline std::optional<Rational> path_metric(const LevelGraph& g, const SubPoint& x,
                                           const SubPoint& y) {
    if (x == y) return Rational(0);
    const Rational len = g.edge_length();
    // Work in integer multiples of m^-(level+dmax).
    const int dmax = std::max(x.is_vertex() ? 0 : x.depth, y.is_vertex() ? 0 : y.depth);
    std::int64_t scale = 1;
    for (int k = 0; k < dmax; ++k) scale *= g.base();
    auto frac_units = [&](const SubPoint& p) {
        std::int64_t span = 1;
        for (int k = 0; k < p.depth; ++k) span *= g.base();
        return static_cast<std::int64_t>(p.num) * (scale / span);
    };

    constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
    std::vector<std::int64_t> dist(g.vertex_count(), kInf);
    using Item = std::pair<std::int64_t, VertexId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    auto seed = [&](VertexId v, std::int64_t d) {
        if (d < dist[v]) {
            dist[v] = d;
            pq.push({d, v});
        }
    };

    std::int64_t best_direct = kInf;
    if (x.is_vertex()) {
        seed(x.vertex, 0);
    } else {
        seed(g.edge(x.edge).tail, frac_units(x));
        seed(g.edge(x.edge).head, scale - frac_units(x));
        if (!y.is_vertex() && y.edge == x.edge)
            best_direct = std::abs(frac_units(x) - frac_units(y));
    }

    auto finish = [&](std::int64_t units) -> std::optional<Rational> {
        if (units >= kInf) return std::nullopt;
        return Rational(units) * len / Rational(scale);
    };

    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        auto relax = [&](VertexId w) { seed(w, d + scale); };
        for (EdgeId e : g.out_edges(v)) relax(g.edge(e).head);
        for (EdgeId e : g.in_edges(v)) relax(g.edge(e).tail);
    }

    if (y.is_vertex()) return finish(dist[y.vertex]);
    std::int64_t via_tail = dist[g.edge(y.edge).tail] >= kInf
                                ? kInf
                                : dist[g.edge(y.edge).tail] + frac_units(y);
    std::int64_t via_head = dist[g.edge(y.edge).head] >= kInf
                                ? kInf
                                : dist[g.edge(y.edge).head] + (scale - frac_units(y));
    return finish(std::min({via_tail, via_head, best_direct}));
}

/// A point of a level graph at an arbitrary exact rational position along an
/// edge (SubPoints are the m-adic special case). Endpoint fractions normalize
/// to vertices.
struct GraphPoint {
    bool at_vertex = true;
    VertexId vertex = kNoVertex;
    EdgeId edge = 0;
    Rational frac;  // position in (0,1) when not at a vertex

    static GraphPoint of_vertex(VertexId v) {
        GraphPoint p;
        p.vertex = v;
        return p;
    }
    static GraphPoint on_edge(const LevelGraph& g, EdgeId e, const Rational& frac) {
        if (frac < 0 || frac > 1) throw DomainError("GraphPoint: fraction outside [0,1]");
        if (frac == 0) return of_vertex(g.edge(e).tail);
        if (frac == 1) return of_vertex(g.edge(e).head);
        GraphPoint p;
        p.at_vertex = false;
        p.vertex = kNoVertex;
        p.edge = e;
        p.frac = frac;
        return p;
    }
    static GraphPoint of(const LevelGraph& g, const SubPoint& s) {
        if (s.is_vertex()) return of_vertex(s.vertex);
        return on_edge(g, s.edge, subpoint_fraction(g, s));
    }
    bool operator==(const GraphPoint& o) const {
        if (at_vertex != o.at_vertex) return false;
        return at_vertex ? vertex == o.vertex : (edge == o.edge && frac == o.frac);
    }
};

inline Rational graph_point_height(const LevelGraph& g, const GraphPoint& p) {
    if (p.at_vertex) return g.height(p.vertex);
    return g.height(g.edge(p.edge).tail) + p.frac * g.edge_length();
}

inline bool in_closed_star_gp(const LevelGraph& g, const GraphPoint& p, VertexId v) {
    if (p.at_vertex) return p.vertex == v || g.adjacent(v, p.vertex);
    const Edge& e = g.edge(p.edge);
    return e.tail == v || e.head == v;
}

/// One projection step for a rational-position point.
inline GraphPoint graph_point_step(const InverseSystem& sys, int source_level,
                                   const GraphPoint& p) {
    const Projection& pr = sys.projection_down_to(source_level - 1);
    const LevelGraph& target = sys.graph_at(source_level - 1);
    if (p.at_vertex) return GraphPoint::of(target, pr.vertex_map[p.vertex]);
    auto [te, cell] = pr.edge_map[p.edge];
    return GraphPoint::on_edge(target, te, (Rational(cell) + p.frac) / sys.base);
}

inline GraphPoint graph_point_project(const InverseSystem& sys, int from_level, int to_level,
                                      GraphPoint p) {
    for (int l = from_level; l > to_level; --l) p = graph_point_step(sys, l, p);
    return p;
}

/// One move of a star-chain certificate: either a hop through the closed star
/// of `vertex` at `level` (cost 2*m^-level) or a walk inside the top-level
/// graph (cost equal to its shortest-path length).
struct StarChainMove {
    bool is_star = false;
    int level = 0;
    VertexId vertex = kNoVertex;
    SubPoint from, to;
    Rational cost;
};

struct StarChainCertificate {
    Rational total;
    std::vector<StarChainMove> moves;
};

/// The finite-depth star-chain metric: the cheapest way to connect two
/// top-level points by walks in X_N and hops through closed stars of any
/// level <= N. This is the inverse-limit metric of the system completed
/// upward by plain subdivision.
class DbarEngine {
public:
    explicit DbarEngine(const InverseSystem& sys, int top_level)
        : sys_(sys), top_(top_level), g_(sys.graph_at(top_level)) {
        build();
    }
    explicit DbarEngine(const InverseSystem& sys) : DbarEngine(sys, sys.top_level()) {}

    int top_level() const { return top_; }
    const LevelGraph& graph() const { return g_; }

    Rational distance(const SubPoint& x, const SubPoint& y) const {
        if (x == y) return Rational(0);
        return distance_point(GraphPoint::of(g_, x), GraphPoint::of(g_, y));
    }

    /// Distance between points at arbitrary exact rational edge positions.
    Rational distance_point(const GraphPoint& x, const GraphPoint& y) const {
        if (x == y) return Rational(0);
        auto [units, scale, parents] = solve(x, y, false);
        return Rational(units) * g_.edge_length() / Rational(scale);
    }

    /// Distances from one vertex to every top-level vertex.
    std::vector<Rational> distances_from(VertexId source) const {
        auto dist = dijkstra_units({{source, 0}}, 1, nullptr);
        std::vector<Rational> out(g_.vertex_count());
        const Rational len = g_.edge_length();
        for (VertexId v = 0; v < g_.vertex_count(); ++v) out[v] = Rational(dist[v]) * len;
        return out;
    }

    /// All-pairs matrix over the top-level vertices (parallel, exact).
    std::vector<std::vector<Rational>> vertex_matrix() const {
        std::vector<std::vector<Rational>> mat(g_.vertex_count());
        parallel_for(g_.vertex_count(),
                     [&](std::size_t v) { mat[v] = distances_from(static_cast<VertexId>(v)); });
        return mat;
    }

    StarChainCertificate certificate(const SubPoint& x, const SubPoint& y) const {
        StarChainCertificate cert;
        if (x == y) {
            cert.total = Rational(0);
            return cert;
        }
        auto [units, scale, parents] = solve(GraphPoint::of(g_, x), GraphPoint::of(g_, y), true);
        cert.total = Rational(units) * g_.edge_length() / Rational(scale);

        // Decode the parent chain into alternating walk/star moves.
        std::vector<std::uint32_t> chain;
        for (std::uint32_t at = node_qy(); at != kNoParent; at = parents[at]) chain.push_back(at);
        std::reverse(chain.begin(), chain.end());

        auto point_of = [&](std::uint32_t node) -> SubPoint {
            if (node < g_.vertex_count()) return SubPoint::at_vertex(static_cast<VertexId>(node));
            if (node == node_qx()) return x;
            if (node == node_qy()) return y;
            throw Error("certificate: star node where a point was expected");
        };
        auto is_star_node = [&](std::uint32_t node) {
            return node >= g_.vertex_count() && node != node_qx() && node != node_qy();
        };

        std::size_t i = 0;
        while (i + 1 < chain.size()) {
            if (is_star_node(chain[i + 1])) {
                const Star& s = stars_[chain[i + 1] - g_.vertex_count()];
                if (i + 2 >= chain.size()) throw Error("certificate: dangling star node");
                StarChainMove mv;
                mv.is_star = true;
                mv.level = s.level;
                mv.vertex = s.vertex;
                mv.from = point_of(chain[i]);
                mv.to = point_of(chain[i + 2]);
                mv.cost = 2 * rational_pow(sys_.base, -s.level);
                cert.moves.push_back(mv);
                i += 2;
            } else {
                // Coalesce a maximal run of plain steps into one walk move.
                std::size_t j = i + 1;
                while (j + 1 < chain.size() && !is_star_node(chain[j + 1])) ++j;
                StarChainMove mv;
                mv.from = point_of(chain[i]);
                mv.to = point_of(chain[j]);
                auto w = path_metric(g_, mv.from, mv.to);
                mv.cost = w ? *w : Rational(0);
                cert.moves.push_back(mv);
                i = j;
            }
        }
        return cert;
    }

private:
    struct Star {
        int level;
        VertexId vertex;
        std::vector<VertexId> members;  // top vertices projecting into the closed star
    };
    static constexpr std::uint32_t kNoParent = 0xffffffffu;

    void build() {
        const int m = sys_.base;
        //

        // Projections of every top vertex to every level.
        const int nlev = top_ - sys_.first_level + 1;
        proj_.assign(nlev, {});
        proj_[nlev - 1].resize(g_.vertex_count());
        for (VertexId v = 0; v < g_.vertex_count(); ++v)
            proj_[nlev - 1][v] = SubPoint::at_vertex(v);
        for (int k = nlev - 2; k >= 0; --k) {
            proj_[k].resize(g_.vertex_count());
            for (VertexId v = 0; v < g_.vertex_count(); ++v)
                proj_[k][v] = project_step_at(k + 1, proj_[k + 1][v]);
        }

        for (int k = 0; k < nlev; ++k) {
            const LevelGraph& gk = sys_.levels[k];
            std::vector<std::vector<VertexId>> members(gk.vertex_count());
            for (VertexId v = 0; v < g_.vertex_count(); ++v) {
                const SubPoint& p = proj_[k][v];
                if (p.is_vertex()) {
                    members[p.vertex].push_back(v);
                    for (EdgeId e : gk.out_edges(p.vertex)) members[gk.edge(e).head].push_back(v);
                    for (EdgeId e : gk.in_edges(p.vertex)) members[gk.edge(e).tail].push_back(v);
                } else {
                    members[gk.edge(p.edge).tail].push_back(v);
                    members[gk.edge(p.edge).head].push_back(v);
                }
            }
            for (VertexId sv = 0; sv < gk.vertex_count(); ++sv) {
                if (members[sv].empty()) continue;
                std::sort(members[sv].begin(), members[sv].end());
                members[sv].erase(std::unique(members[sv].begin(), members[sv].end()),
                                  members[sv].end());
                Star s;
                s.level = sys_.first_level + k;
                s.vertex = sv;
                s.members = std::move(members[sv]);
                // m^(top-k): both halves of a 2*m^-level hop, in m^-top units.
                star_half_units_.push_back(int_pow64(m, top_ - s.level));
                stars_.push_back(std::move(s));
            }
        }

        // CSR adjacency over [vertices | stars].
        const std::size_t n = g_.vertex_count() + stars_.size();
        std::vector<std::vector<std::pair<std::uint32_t, std::int64_t>>> adj(n);
        for (EdgeId e = 0; e < g_.edge_count(); ++e) {
            const Edge& ed = g_.edge(e);
            adj[ed.tail].push_back({ed.head, 1});
            adj[ed.head].push_back({ed.tail, 1});
        }
        for (std::size_t s = 0; s < stars_.size(); ++s) {
            const std::uint32_t snode = static_cast<std::uint32_t>(g_.vertex_count() + s);
            for (VertexId v : stars_[s].members) {
                adj[v].push_back({snode, star_half_units_[s]});
                adj[snode].push_back({v, star_half_units_[s]});
            }
        }
        offsets_.assign(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + adj[i].size();
        targets_.resize(offsets_.back());
        costs_.resize(offsets_.back());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < adj[i].size(); ++j) {
                targets_[offsets_[i] + j] = adj[i][j].first;
                costs_[offsets_[i] + j] = adj[i][j].second;
            }
    }

    SubPoint project_step_at(int index, const SubPoint& p) const {
        const Projection& pr = sys_.projections[index - 1];
        const LevelGraph& target = sys_.levels[index - 1];
        if (p.is_vertex()) return pr.vertex_map[p.vertex];
        auto [te, cell] = pr.edge_map[p.edge];
        std::uint64_t span = 1;
        for (int k = 0; k < p.depth; ++k) span *= static_cast<std::uint64_t>(sys_.base);
        return make_edge_point(target, te, static_cast<std::uint64_t>(cell) * span + p.num,
                               p.depth + 1);
    }

    static std::int64_t int_pow64(int b, int e) {
        std::int64_t r = 1;
        for (int k = 0; k < e; ++k) r *= b;
        return r;
    }

    std::uint32_t node_qx() const {
        return static_cast<std::uint32_t>(g_.vertex_count() + stars_.size());
    }
    std::uint32_t node_qy() const { return node_qx() + 1; }

    /// Dijkstra over the CSR graph with all stored costs scaled by `scale`,
    /// extra seeded starts, and optional extra (query) adjacency.
    std::vector<std::int64_t> dijkstra_units(
        const std::vector<std::pair<std::uint32_t, std::int64_t>>& seeds, std::int64_t scale,
        std::vector<std::uint32_t>* parents,
        const std::vector<std::vector<std::pair<std::uint32_t, std::int64_t>>>* extra = nullptr)
        const {
        const std::size_t n =
            g_.vertex_count() + stars_.size() + (extra ? extra->size() : 0);
        constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
        std::vector<std::int64_t> dist(n, kInf);
        if (parents) parents->assign(n, kNoParent);
        using Item = std::pair<std::int64_t, std::uint32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (auto [node, d] : seeds) {
            if (d < dist[node]) {
                dist[node] = d;
                pq.push({d, node});
            }
        }
        const std::size_t base_n = g_.vertex_count() + stars_.size();
        auto for_each_edge = [&](std::uint32_t u, auto&& fn) {
            if (u < base_n) {
                for (std::size_t j = offsets_[u]; j < offsets_[u + 1]; ++j)
                    fn(targets_[j], costs_[j] * scale);
            }
            if (extra) {
                if (u >= base_n) {
                    for (auto [t, c] : (*extra)[u - base_n]) fn(t, c);
                } else {
                    // extra nodes connect symmetrically; scan their lists.
                    for (std::size_t q = 0; q < extra->size(); ++q)
                        for (auto [t, c] : (*extra)[q])
                            if (t == u) fn(static_cast<std::uint32_t>(base_n + q), c);
                }
            }
        };
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            for_each_edge(u, [&](std::uint32_t t, std::int64_t c) {
                if (d + c < dist[t]) {
                    dist[t] = d + c;
                    if (parents) (*parents)[t] = u;
                    pq.push({d + c, t});
                }
            });
        }
        return dist;
    }

    GraphPoint project_step_gp(int index, const GraphPoint& p) const {
        return graph_point_step(sys_, sys_.first_level + index, p);
    }

    /// Shared query path: returns (units, scale, parents) for x -> y.
    std::tuple<std::int64_t, std::int64_t, std::vector<std::uint32_t>> solve(
        const GraphPoint& x, const GraphPoint& y, bool want_parents) const {
        // Work in integer multiples of edge_length / scale. Every edge in the
        // solver costs at most m^(top-first) * scale units, and a shortest
        // path uses fewer than (edges + stars + 4) of them; keep the whole
        // computation clear of int64.
        BigInt denom = lcm(x.at_vertex ? BigInt(1) : denominator(x.frac),
                           y.at_vertex ? BigInt(1) : denominator(y.frac));
        const BigInt worst = denom * int_pow(sys_.base, top_ - sys_.first_level) *
                             BigInt(g_.edge_count() + stars_.size() + 4);
        if (worst > (BigInt(1) << 61))
            throw DomainError("query point denominators too large for the exact solver");
        const std::int64_t scale = denom.convert_to<std::int64_t>();

        // Two extra nodes qx, qy with stub edges to the host-edge endpoints,
        // a direct same-edge link, and half-hop links to every star whose
        // preimage contains the point.
        std::vector<std::vector<std::pair<std::uint32_t, std::int64_t>>> extra(2);
        auto attach = [&](std::size_t qi, const GraphPoint& p) {
            if (p.at_vertex) return;  // handled by seeding / direct lookup
            const std::int64_t units =
                numerator(p.frac * scale).convert_to<std::int64_t>();
            extra[qi].push_back({g_.edge(p.edge).tail, units});
            extra[qi].push_back({g_.edge(p.edge).head, scale - units});
            // Star memberships of the point itself.
            const int nlev = top_ - sys_.first_level + 1;
            std::vector<GraphPoint> chain(nlev);
            chain[nlev - 1] = p;
            for (int k = nlev - 2; k >= 0; --k) chain[k] = project_step_gp(k + 1, chain[k + 1]);
            for (std::size_t s = 0; s < stars_.size(); ++s) {
                const Star& st = stars_[s];
                const GraphPoint& proj = chain[st.level - sys_.first_level];
                if (in_closed_star_gp(sys_.levels[st.level - sys_.first_level], proj, st.vertex))
                    extra[qi].push_back({static_cast<std::uint32_t>(g_.vertex_count() + s),
                                         star_half_units_[s] * scale});
            }
        };
        attach(0, x);
        attach(1, y);
        if (!x.at_vertex && !y.at_vertex && x.edge == y.edge) {
            const Rational gap = x.frac > y.frac ? x.frac - y.frac : y.frac - x.frac;
            extra[0].push_back({node_qy(), numerator(gap * scale).convert_to<std::int64_t>()});
        }
        if (x.at_vertex) extra[0].push_back({x.vertex, 0});
        if (y.at_vertex) extra[1].push_back({y.vertex, 0});

        std::vector<std::uint32_t> parents;
        auto dist = dijkstra_units({{node_qx(), 0}}, scale, want_parents ? &parents : nullptr,
                                   &extra);
        return {dist[node_qy()], scale, std::move(parents)};
    }

    const InverseSystem& sys_;
    int top_;
    const LevelGraph& g_;
    std::vector<std::vector<SubPoint>> proj_;  // [level index][top vertex]
    std::vector<Star> stars_;
    std::vector<std::int64_t> star_half_units_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> targets_;
    std::vector<std::int64_t> costs_;
};

/// Re-checks a certificate against first principles: chained endpoints, star
/// membership of the projections, exact per-move costs.
inline bool verify_star_chain(const InverseSystem& sys, int top_level, const SubPoint& x,
                              const SubPoint& y, const StarChainCertificate& cert,
                              std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (cert.moves.empty()) {
        if (!(x == y)) return fail("empty certificate for distinct points");
        return cert.total == Rational(0) || fail("nonzero total for equal points");
    }
    if (!(cert.moves.front().from == x)) return fail("chain does not start at x");
    if (!(cert.moves.back().to == y)) return fail("chain does not end at y");
    Rational sum(0);
    const LevelGraph& g = sys.graph_at(top_level);
    for (std::size_t i = 0; i < cert.moves.size(); ++i) {
        const StarChainMove& mv = cert.moves[i];
        if (i > 0 && !(cert.moves[i - 1].to == mv.from)) return fail("broken chain");
        if (mv.is_star) {
            if (mv.level < sys.first_level || mv.level > top_level)
                return fail("star level out of range");
            const LevelGraph& gk = sys.graph_at(mv.level);
            SubPoint pf = project(sys, top_level, mv.level, mv.from);
            SubPoint pt = project(sys, top_level, mv.level, mv.to);
            if (!in_closed_star(gk, pf, mv.vertex) || !in_closed_star(gk, pt, mv.vertex))
                return fail("projections leave the named closed star");
            if (mv.cost != 2 * rational_pow(sys.base, -mv.level)) return fail("bad star cost");
        } else {
            auto w = path_metric(g, mv.from, mv.to);
            if (!w) return fail("walk between disconnected points");
            if (mv.cost != *w) return fail("walk cost is not the shortest-path length");
        }
        sum += mv.cost;
    }
    if (sum != cert.total) return fail("move costs do not sum to the total");
    return true;
}

struct TrimmedStarBracket {
    int level = 0;     // minimal level where no trimmed star holds both points
    Rational lower;    // ((m-2)/m) * m^-level, strict
    Rational upper;    // 2 * m^-(level-1)
};

/// Candidate coarse vertices whose trimmed star could contain p.
inline std::vector<VertexId> trimmed_star_candidates(const LevelGraph& g, const SubPoint& p) {
    if (p.is_vertex()) return {p.vertex};
    std::vector<VertexId> out;
    const Edge& e = g.edge(p.edge);
    if (in_trimmed_star(g, p, e.tail)) out.push_back(e.tail);
    if (in_trimmed_star(g, p, e.head)) out.push_back(e.head);
    return out;
}

inline TrimmedStarBracket trimmed_star_bracket(const InverseSystem& sys, int top_level,
                                               const SubPoint& x, const SubPoint& y) {
    if (x == y) throw DomainError("trimmed_star_bracket: points must be distinct");
    const int m = sys.base;
    for (int j = sys.first_level; j <= top_level; ++j) {
        const LevelGraph& gj = sys.graph_at(j);
        SubPoint px = project(sys, top_level, j, x);
        SubPoint py = project(sys, top_level, j, y);
        bool shared = false;
        for (VertexId v : trimmed_star_candidates(gj, px))
            if (in_trimmed_star(gj, py, v)) shared = true;
        if (!shared) {
            TrimmedStarBracket b;
            b.level = j;
            b.lower = Rational(m - 2, m) * rational_pow(m, -j);
            b.upper = 2 * rational_pow(m, -(j - 1));
            return b;
        }
    }
    throw DomainError("trimmed_star_bracket: points share trimmed stars at every level <= " +
                      std::to_string(top_level));
}

struct ComponentStat {
    Rational interval_lo, interval_hi;
    std::size_t components = 0;
    Rational worst_diameter;  // max over components of the star-chain diameter
};

struct LipschitzLightReport {
    Rational worst_ratio;  // component diameter / interval diameter
    Rational bound;        // 8m
    bool pass = true;
    std::vector<ComponentStat> intervals;
};

/// For each interval I, splits the top-level vertices with height in I into
/// diam(I)-components under the star-chain metric and measures their
/// diameters. The canonical height map is Lipschitz light with constant 8m.
inline LipschitzLightReport phi_lipschitz_light_check(
    const InverseSystem& sys, const std::vector<Interval>& intervals, int top_level,
    const std::vector<std::vector<Rational>>* dbar_matrix = nullptr) {
    std::vector<std::vector<Rational>> local;
    if (!dbar_matrix) {
        local = DbarEngine(sys, top_level).vertex_matrix();
        dbar_matrix = &local;
    }
    const LevelGraph& g = sys.graph_at(top_level);
    LipschitzLightReport rep;
    rep.worst_ratio = Rational(0);
    rep.bound = Rational(8 * sys.base);
    for (const Interval& iv : intervals) {
        const Rational diam = iv.length();
        if (!(diam > 0)) throw DomainError("lipschitz-light grid: empty interval");
        std::vector<VertexId> pts;
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            if (iv.contains(g.height(v))) pts.push_back(v);
        // Union-find over delta-chains with delta = diam(I).
        std::vector<std::size_t> parent(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) parent[i] = i;
        std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                if ((*dbar_matrix)[pts[i]][pts[j]] <= diam) parent[find(i)] = find(j);
        ComponentStat stat;
        stat.interval_lo = iv.lo;
        stat.interval_hi = iv.hi;
        stat.worst_diameter = Rational(0);
        std::vector<std::size_t> roots;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (find(i) == i) roots.push_back(i);
        stat.components = roots.size();
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                if (find(i) == find(j))
                    stat.worst_diameter = std::max(stat.worst_diameter,
                                                   (*dbar_matrix)[pts[i]][pts[j]]);
        rep.intervals.push_back(stat);
        rep.worst_ratio = std::max(rep.worst_ratio, stat.worst_diameter / diam);
    }
    rep.pass = rep.worst_ratio <= rep.bound;
    return rep;
}

/// The m-adic grid over the window at scales m^0 .. m^-depth.
inline std::vector<Interval> grid_intervals(const InverseSystem& sys, int depth) {
    std::vector<Interval> out;
    for (int s = 0; s <= depth; ++s) {
        const Rational step = rational_pow(sys.base, -s);
        BigInt k0 = rational_floor(sys.window.lo / step);
        BigInt k1 = rational_ceil(sys.window.hi / step);
        for (BigInt k = k0; k < k1; ++k)
            out.push_back(Interval{Rational(k) * step, Rational(k + 1) * step});
    }
    return out;
}

struct PathComparisonReport {
    int theta = 0;
    bool openness_ok = true;
    std::vector<std::string> openness_violations;
    bool lower_ok = true;   // dbar <= d_N everywhere
    bool upper_ok = true;   // d_N <= ((2m+theta)/(2(m-1))) * dbar
    Rational upper_bound;   // the factor above
    Rational worst_upper;   // max d_N / dbar over distinct pairs
    std::string worst_pair;
};

/// Measures the fiber-connectivity constant, checks the combinatorial
/// openness of every projection, and compares the top-level path metric with
/// the star-chain metric over all vertex pairs.
inline PathComparisonReport path_metric_comparison(const InverseSystem& sys, int top_level,
                                                   std::optional<int> theta_override = {}) {
    const int m = sys.base;
    PathComparisonReport rep;

    // Condition (a): around every vertex, every subdivision cell incident to
    // the image must be covered by an incident edge image.
    for (int lvl = sys.first_level; lvl < top_level; ++lvl) {
        const LevelGraph& src = sys.graph_at(lvl + 1);
        const LevelGraph& dst = sys.graph_at(lvl);
        const Projection& pr = sys.projection_down_to(lvl);
        for (VertexId w = 0; w < src.vertex_count(); ++w) {
            const SubPoint& p = pr.vertex_map[w];
            std::vector<std::pair<EdgeId, std::uint32_t>> required;
            if (p.is_vertex()) {
                for (EdgeId e : dst.out_edges(p.vertex)) required.push_back({e, 0});
                for (EdgeId e : dst.in_edges(p.vertex))
                    required.push_back({e, static_cast<std::uint32_t>(m - 1)});
            } else {
                required.push_back({p.edge, static_cast<std::uint32_t>(p.num - 1)});
                required.push_back({p.edge, p.num});
            }
            for (auto need : required) {
                bool covered = false;
                for (EdgeId e : src.out_edges(w))
                    if (pr.edge_map[e] == need) covered = true;
                for (EdgeId e : src.in_edges(w))
                    if (pr.edge_map[e] == need) covered = true;
                if (!covered) {
                    rep.openness_ok = false;
                    rep.openness_violations.push_back(
                        "level " + std::to_string(lvl + 1) + " vertex " + src.label(w) +
                        " misses a subdivision cell of its image");
                }
            }
        }
    }

    // Condition (b): theta = max over fibers of the pairwise hop distance.
    int theta = 0;
    for (int lvl = sys.first_level; lvl < top_level; ++lvl) {
        const LevelGraph& src = sys.graph_at(lvl + 1);
        const Projection& pr = sys.projection_down_to(lvl);
        std::unordered_map<std::uint64_t, std::vector<VertexId>> fibers;
        for (VertexId w = 0; w < src.vertex_count(); ++w) {
            const SubPoint& p = pr.vertex_map[w];
            if (p.is_vertex()) fibers[p.key()].push_back(w);
        }
        for (auto& [key, fiber] : fibers) {
            if (fiber.size() < 2) continue;
            for (VertexId a : fiber) {
                // Undirected BFS hop distances from a.
                std::vector<int> hops(src.vertex_count(), -1);
                std::vector<VertexId> bfs{a};
                hops[a] = 0;
                for (std::size_t qi = 0; qi < bfs.size(); ++qi) {
                    VertexId u = bfs[qi];
                    auto visit = [&](VertexId t) {
                        if (hops[t] < 0) {
                            hops[t] = hops[u] + 1;
                            bfs.push_back(t);
                        }
                    };
                    for (EdgeId e : src.out_edges(u)) visit(src.edge(e).head);
                    for (EdgeId e : src.in_edges(u)) visit(src.edge(e).tail);
                }
                for (VertexId b : fiber)
                    if (hops[b] > theta) theta = hops[b];
            }
        }
    }
    rep.theta = theta_override.value_or(theta);

    rep.upper_bound = Rational(2 * m + rep.theta, 2 * (m - 1));
    rep.worst_upper = Rational(0);

    const LevelGraph& g = sys.graph_at(top_level);
    DbarEngine engine(sys, top_level);
    auto dbar = engine.vertex_matrix();
    for (VertexId a = 0; a < g.vertex_count(); ++a) {
        auto hops = [&] {
            std::vector<std::int64_t> h(g.vertex_count(), -1);
            std::vector<VertexId> bfs{a};
            h[a] = 0;
            for (std::size_t qi = 0; qi < bfs.size(); ++qi) {
                VertexId u = bfs[qi];
                auto visit = [&](VertexId t) {
                    if (h[t] < 0) {
                        h[t] = h[u] + 1;
                        bfs.push_back(t);
                    }
                };
                for (EdgeId e : g.out_edges(u)) visit(g.edge(e).head);
                for (EdgeId e : g.in_edges(u)) visit(g.edge(e).tail);
            }
            return h;
        }();
        for (VertexId b = a + 1; b < g.vertex_count(); ++b) {
            if (hops[b] < 0) continue;  // different components
            const Rational dn = Rational(hops[b]) * g.edge_length();
            if (dbar[a][b] > dn) rep.lower_ok = false;
            const Rational ratio = dn / dbar[a][b];
            if (ratio > rep.worst_upper) {
                rep.worst_upper = ratio;
                rep.worst_pair = g.label(a) + " , " + g.label(b);
            }
        }
    }
    rep.upper_ok = rep.worst_upper <= rep.upper_bound;
    return rep;
}

}  // namespace l1weaver
