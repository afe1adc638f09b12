#pragma once

#include "rational.hpp"

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace l1weaver {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;
inline constexpr VertexId kNoVertex = 0xffffffffu;

struct Edge {
    VertexId tail;
    VertexId head;
};

/// One level of an inverse system: a finite directed multigraph where every
/// edge has length m^-level and heights increase by exactly one edge length
/// along every edge. Immutable once finalize() has run.
class LevelGraph {
public:
    LevelGraph() = default;
    LevelGraph(int level, int base) : level_(level), base_(base) {
        if (base < 2) throw DomainError("LevelGraph: base must be >= 2");
    }

    VertexId add_vertex(Rational height, std::string label = {}) {
        assert(!finalized_);
        heights_.push_back(std::move(height));
        labels_.push_back(std::move(label));
        return static_cast<VertexId>(heights_.size() - 1);
    }

    EdgeId add_edge(VertexId tail, VertexId head) {
        assert(!finalized_);
        assert(tail < heights_.size() && head < heights_.size());
        edges_.push_back(Edge{tail, head});
        return static_cast<EdgeId>(edges_.size() - 1);
    }

    /// Builds adjacency, topological data and (for small graphs) the
    /// reachability closure. Must be called before queries.
    void finalize() {
        if (finalized_) return;
        const std::size_t n = heights_.size();
        out_.assign(n, {});
        in_.assign(n, {});
        for (EdgeId e = 0; e < edges_.size(); ++e) {
            out_[edges_[e].tail].push_back(e);
            in_[edges_[e].head].push_back(e);
        }
        compute_topo_order();
        if (acyclic_ && n > 0 && n <= kClosureLimit) compute_closure();
        finalized_ = true;
    }

    int level() const { return level_; }
    int base() const { return base_; }
    Rational edge_length() const { return rational_pow(base_, -level_); }
    std::size_t vertex_count() const { return heights_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const Edge& edge(EdgeId e) const { return edges_[e]; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Rational& height(VertexId v) const { return heights_[v]; }
    const std::string& label(VertexId v) const { return labels_[v]; }
    const std::vector<EdgeId>& out_edges(VertexId v) const { return out_[v]; }
    const std::vector<EdgeId>& in_edges(VertexId v) const { return in_[v]; }
    bool is_acyclic() const { return acyclic_; }
    const std::vector<VertexId>& topo_order() const { return topo_order_; }

    bool adjacent(VertexId a, VertexId b) const {
        for (EdgeId e : out_[a])
            if (edges_[e].head == b) return true;
        for (EdgeId e : in_[a])
            if (edges_[e].tail == b) return true;
        return false;
    }

    /// Reflexive-transitive reachability along directed edges.
    bool reaches(VertexId from, VertexId to) const {
        assert(finalized_);
        if (from == to) return true;
        if (!closure_.empty()) return closure_bit(from, to);
        // Fallback for very large graphs: plain BFS.
        std::vector<char> seen(heights_.size(), 0);
        std::vector<VertexId> stack{from};
        seen[from] = 1;
        while (!stack.empty()) {
            VertexId v = stack.back();
            stack.pop_back();
            for (EdgeId e : out_[v]) {
                VertexId h = edges_[e].head;
                if (h == to) return true;
                if (!seen[h]) {
                    seen[h] = 1;
                    stack.push_back(h);
                }
            }
        }
        return false;
    }

private:
    static constexpr std::size_t kClosureLimit = 8192;

    void compute_topo_order() {
        const std::size_t n = heights_.size();
        std::vector<std::uint32_t> indeg(n, 0);
        for (const Edge& e : edges_) ++indeg[e.head];
        std::vector<VertexId> order;
        order.reserve(n);
        for (VertexId v = 0; v < n; ++v)
            if (indeg[v] == 0) order.push_back(v);
        for (std::size_t i = 0; i < order.size(); ++i) {
            for (EdgeId e : out_[order[i]]) {
                VertexId h = edges_[e].head;
                if (--indeg[h] == 0) order.push_back(h);
            }
        }
        acyclic_ = order.size() == n;
        topo_order_ = std::move(order);
    }

    void compute_closure() {
        const std::size_t n = heights_.size();
        words_per_row_ = (n + 63) / 64;
        closure_.assign(n * words_per_row_, 0);
        // Process in reverse topological order so successor rows are complete.
        for (auto it = topo_order_.rbegin(); it != topo_order_.rend(); ++it) {
            VertexId v = *it;
            std::uint64_t* row = &closure_[v * words_per_row_];
            for (EdgeId e : out_[v]) {
                VertexId h = edges_[e].head;
                row[h / 64] |= 1ull << (h % 64);
                const std::uint64_t* hrow = &closure_[h * words_per_row_];
                for (std::size_t w = 0; w < words_per_row_; ++w) row[w] |= hrow[w];
            }
        }
    }

    bool closure_bit(VertexId a, VertexId b) const {
        return (closure_[a * words_per_row_ + b / 64] >> (b % 64)) & 1u;
    }

    int level_ = 0;
    int base_ = 2;
    std::vector<Edge> edges_;
    std::vector<Rational> heights_;
    std::vector<std::string> labels_;
    std::vector<std::vector<EdgeId>> out_, in_;
    std::vector<VertexId> topo_order_;
    std::vector<std::uint64_t> closure_;
    std::size_t words_per_row_ = 0;
    bool acyclic_ = false;
    bool finalized_ = false;
};

/// A point of a level graph in canonical m-adic form: either a vertex, or the
/// point at fraction num/m^depth along a directed edge with 0 < num < m^depth
/// and num not divisible by m. Canonical form makes value equality equal
/// representation equality, so SubPoints can be hashed and sorted.
struct SubPoint {
    enum class Kind : std::uint8_t { Vertex, EdgeInterior };

    Kind kind = Kind::Vertex;
    VertexId vertex = kNoVertex;
    EdgeId edge = 0;
    std::uint32_t num = 0;
    std::uint8_t depth = 0;

    static SubPoint at_vertex(VertexId v) {
        SubPoint p;
        p.kind = Kind::Vertex;
        p.vertex = v;
        return p;
    }

    bool is_vertex() const { return kind == Kind::Vertex; }

    bool operator==(const SubPoint& o) const {
        if (kind != o.kind) return false;
        if (kind == Kind::Vertex) return vertex == o.vertex;
        return edge == o.edge && num == o.num && depth == o.depth;
    }
    bool operator!=(const SubPoint& o) const { return !(*this == o); }

    /// Stable packed key (canonical form makes this injective).
    std::uint64_t key() const {
        if (kind == Kind::Vertex) return (std::uint64_t(1) << 63) | vertex;
        return (std::uint64_t(edge) << 36) | (std::uint64_t(depth) << 31) | num;
    }
    bool operator<(const SubPoint& o) const { return key() < o.key(); }
};

struct SubPointHash {
    std::size_t operator()(const SubPoint& p) const {
        std::uint64_t k = p.key();
        k ^= k >> 33;
        k *= 0xff51afd7ed558ccdull;
        k ^= k >> 33;
        return static_cast<std::size_t>(k);
    }
};

/// Canonical constructor for the point at num/m^depth along edge e.
/// Accepts 0 <= num <= m^depth and normalizes endpoints to vertices.
inline SubPoint make_edge_point(const LevelGraph& g, EdgeId e, std::uint64_t num, int depth) {
    const int m = g.base();
    if (depth < 0 || depth > 15) throw DomainError("make_edge_point: depth out of range");
    std::uint64_t span = 1;
    for (int k = 0; k < depth; ++k) span *= static_cast<std::uint64_t>(m);
    if (num > span) throw DomainError("make_edge_point: numerator exceeds m^depth");
    while (depth > 0 && num % static_cast<std::uint64_t>(m) == 0) {
        num /= static_cast<std::uint64_t>(m);
        span /= static_cast<std::uint64_t>(m);
        --depth;
    }
    if (depth == 0) {
        return SubPoint::at_vertex(num == 0 ? g.edge(e).tail : g.edge(e).head);
    }
    SubPoint p;
    p.kind = SubPoint::Kind::EdgeInterior;
    p.edge = e;
    p.num = static_cast<std::uint32_t>(num);
    p.depth = static_cast<std::uint8_t>(depth);
    return p;
}

/// Position along the host edge as a rational in (0,1); 0 for vertices.
inline Rational subpoint_fraction(const LevelGraph& g, const SubPoint& p) {
    if (p.is_vertex()) return Rational(0);
    return Rational(BigInt(p.num), int_pow(g.base(), p.depth));
}

inline Rational subpoint_height(const LevelGraph& g, const SubPoint& p) {
    if (p.is_vertex()) return g.height(p.vertex);
    return g.height(g.edge(p.edge).tail) + subpoint_fraction(g, p) * g.edge_length();
}

namespace detail {
/// Compares num1/m^d1 ? num2/m^d2 without rationals.
inline int frac_cmp(int m, std::uint64_t n1, int d1, std::uint64_t n2, int d2) {
    unsigned __int128 a = n1, b = n2;
    for (int k = 0; k < d2; ++k) a *= static_cast<unsigned>(m);
    for (int k = 0; k < d1; ++k) b *= static_cast<unsigned>(m);
    return a < b ? -1 : (a == b ? 0 : 1);
}
}  // namespace detail

/// Partial order: true iff a (possibly trivial) directed path leads from x to y.
inline bool precedes(const LevelGraph& g, const SubPoint& x, const SubPoint& y) {
    if (x == y) return true;
    if (!x.is_vertex() && !y.is_vertex() && x.edge == y.edge)
        return detail::frac_cmp(g.base(), x.num, x.depth, y.num, y.depth) < 0;
    VertexId start = x.is_vertex() ? x.vertex : g.edge(x.edge).head;
    VertexId target = y.is_vertex() ? y.vertex : g.edge(y.edge).tail;
    return g.reaches(start, target);
}

/// p lies in the closed star of coarse vertex v (union of closed edges at v).
inline bool in_closed_star(const LevelGraph& g, const SubPoint& p, VertexId v) {
    if (p.is_vertex()) return p.vertex == v || g.adjacent(v, p.vertex);
    const Edge& e = g.edge(p.edge);
    return e.tail == v || e.head == v;
}

/// p lies in the open star of coarse vertex v ({v} plus open incident edges).
inline bool in_open_star(const LevelGraph& g, const SubPoint& p, VertexId v) {
    if (p.is_vertex()) return p.vertex == v;
    const Edge& e = g.edge(p.edge);
    return e.tail == v || e.head == v;
}

/// p lies in the trimmed star of coarse vertex v: the closed ball of radius
/// ((m-1)/m) * m^-level, i.e. v plus the incident edge segments that stop one
/// subdivision step short of the far endpoints.
inline bool in_trimmed_star(const LevelGraph& g, const SubPoint& p, VertexId v) {
    if (p.is_vertex()) return p.vertex == v;
    const int m = g.base();
    const Edge& e = g.edge(p.edge);
    unsigned __int128 span = 1;
    for (int k = 0; k < p.depth; ++k) span *= static_cast<unsigned>(m);
    unsigned __int128 scaled = static_cast<unsigned __int128>(p.num) * static_cast<unsigned>(m);
    if (e.tail == v)  // fraction <= (m-1)/m
        return scaled <= (static_cast<unsigned __int128>(m) - 1) * span;
    if (e.head == v)  // fraction >= 1/m
        return scaled >= span;
    return false;
}

/// a is a vertex of the subdivision X' (SubPoint of depth <= 1); tests whether
/// p lies in the open star of a inside X' (a itself plus the adjacent open
/// subdivision edges).
inline bool in_open_star_prime(const LevelGraph& g, const SubPoint& a, const SubPoint& p) {
    assert(a.is_vertex() || a.depth == 1);
    if (p == a) return true;
    const int m = g.base();
    if (a.is_vertex()) {
        if (p.is_vertex()) return false;
        const Edge& e = g.edge(p.edge);
        // depth >= 1 for interior points; the first/last subdivision cell.
        if (e.tail == a.vertex) return detail::frac_cmp(m, p.num, p.depth, 1, 1) < 0;
        if (e.head == a.vertex)
            return detail::frac_cmp(m, p.num, p.depth, static_cast<std::uint64_t>(m) - 1, 1) > 0;
        return false;
    }
    if (p.is_vertex() || p.edge != a.edge) return false;
    // |p - a| < 1/m along the shared edge: compare p.num*m against a.num*m^p.depth.
    unsigned __int128 lhs = static_cast<unsigned __int128>(p.num) * static_cast<unsigned>(m);
    unsigned __int128 rhs = a.num;
    for (int k = 0; k < p.depth; ++k) rhs *= static_cast<unsigned>(m);
    unsigned __int128 gap = 1;
    for (int k = 0; k < p.depth; ++k) gap *= static_cast<unsigned>(m);
    return (lhs > rhs ? lhs - rhs : rhs - lhs) < gap;
}

struct SubdivisionResult {
    LevelGraph graph;
    /// For every vertex of the subdivided graph, its position in the original.
    std::vector<SubPoint> vertex_origin;
    /// For every edge, (original edge, cell index in 0..m^k-1).
    std::vector<std::pair<EdgeId, std::uint32_t>> edge_origin;
};

/// Replaces every edge by a directed path of m^k edges; interior vertices get
/// exactly interpolated heights. k = 0 returns a copy.
inline SubdivisionResult subdivide_with_origin(const LevelGraph& g, int k) {
    if (k < 0) throw DomainError("subdivide: k must be >= 0");
    const int m = g.base();
    std::uint64_t cells = 1;
    for (int i = 0; i < k; ++i) cells *= static_cast<std::uint64_t>(m);

    SubdivisionResult res;
    res.graph = LevelGraph(g.level() + k, m);
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        res.graph.add_vertex(g.height(v), g.label(v));
        res.vertex_origin.push_back(SubPoint::at_vertex(v));
    }
    const Rational step = g.edge_length() / Rational(BigInt(cells));
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const Edge& ed = g.edge(e);
        VertexId prev = ed.tail;
        for (std::uint64_t j = 1; j <= cells; ++j) {
            VertexId next;
            if (j == cells) {
                next = ed.head;
            } else {
                next = res.graph.add_vertex(g.height(ed.tail) + Rational(BigInt(j)) * step,
                                            "e" + std::to_string(e) + "." + std::to_string(j));
                res.vertex_origin.push_back(make_edge_point(g, e, j, k));
            }
            res.graph.add_edge(prev, next);
            res.edge_origin.emplace_back(e, static_cast<std::uint32_t>(j - 1));
            prev = next;
        }
    }
    res.graph.finalize();
    return res;
}

inline LevelGraph subdivide(const LevelGraph& g, int k) {
    return subdivide_with_origin(g, k).graph;
}

/// A source-to-sink directed path, kept as its edge sequence so parallel
/// edges give distinct paths. `source` disambiguates the edgeless case.
struct DirectedPath {
    VertexId source = kNoVertex;
    std::vector<EdgeId> edges;
};

/// All maximal directed paths. Throws if more than `limit` paths.
inline std::vector<DirectedPath> maximal_directed_paths(const LevelGraph& g,
                                                        std::size_t limit = 1u << 20) {
    if (!g.is_acyclic()) throw DomainError("maximal_directed_paths: graph has a directed cycle");
    std::vector<DirectedPath> result;
    std::vector<EdgeId> current;
    std::function<void(VertexId, VertexId)> walk = [&](VertexId source, VertexId v) {
        if (g.out_edges(v).empty()) {
            if (result.size() >= limit)
                throw DomainError("maximal_directed_paths: more than limit paths");
            result.push_back(DirectedPath{source, current});
            return;
        }
        for (EdgeId e : g.out_edges(v)) {
            current.push_back(e);
            walk(source, g.edge(e).head);
            current.pop_back();
        }
    };
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (g.in_edges(v).empty()) walk(v, v);
    return result;
}

/// True when p (a vertex or an edge-interior point) lies on the path.
inline bool path_contains(const LevelGraph& g, const DirectedPath& path, const SubPoint& p) {
    if (p.is_vertex()) {
        if (path.source == p.vertex) return true;
        for (EdgeId e : path.edges)
            if (g.edge(e).head == p.vertex) return true;
        return false;
    }
    for (EdgeId e : path.edges)
        if (e == p.edge) return true;
    return false;
}

}  // namespace l1weaver
