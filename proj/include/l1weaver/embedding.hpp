#pragma once

#include "cut_metrics.hpp"
#include "metrics.hpp"

#include <map>

namespace l1weaver {

/// Canonical ordering of the supported slices (lexicographic on the sorted
/// element keys) so embeddings are reproducible byte for byte.
inline std::vector<const PartialSlice*> canonical_slice_order(const SliceMeasure& mu) {
    std::vector<const PartialSlice*> order;
    order.reserve(mu.support.size());
    for (const auto& [s, w] : mu.support) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const PartialSlice* a, const PartialSlice* b) {
        const std::size_t n = std::min(a->elements.size(), b->elements.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (a->elements[i].key() != b->elements[i].key())
                return a->elements[i].key() < b->elements[i].key();
        }
        return a->elements.size() < b->elements.size();
    });
    return order;
}

/// One point's sparse coordinate vector: coordinate k equals the mass of the
/// k-th slice when the point lies strictly above it, else 0.
struct EmbeddingVector {
    std::string owner;
    std::vector<std::pair<std::uint32_t, Rational>> coords;  // (slice rank, mass), rank-sorted
};

inline Rational l1_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    Rational d(0);
    std::size_t i = 0, j = 0;
    while (i < a.coords.size() || j < b.coords.size()) {
        if (j == b.coords.size() || (i < a.coords.size() && a.coords[i].first < b.coords[j].first)) {
            d += a.coords[i].second;
            ++i;
        } else if (i == a.coords.size() || b.coords[j].first < a.coords[i].first) {
            d += b.coords[j].second;
            ++j;
        } else {
            const Rational diff = a.coords[i].second - b.coords[j].second;
            d += diff < 0 ? -diff : diff;
            ++i;
            ++j;
        }
    }
    return d;
}

/// Finite-dimensional l1 coordinates for the given points: pairwise l1
/// distances reproduce the cut metric of `mu` exactly.
inline std::vector<EmbeddingVector> embed_level(const InverseSystem& sys, const SliceMeasure& mu,
                                                const std::vector<SubPoint>& points) {
    if (!mu.seeds.empty())
        for (const SubPoint& p : points) require_window_sufficient(sys, mu.seeds, mu.level, p);
    auto order = canonical_slice_order(mu);
    std::vector<EmbeddingVector> out(points.size());
    const LevelGraph& g = sys.graph_at(mu.level);
    parallel_for(points.size(), [&](std::size_t i) {
        EmbeddingVector& vec = out[i];
        vec.owner = points[i].is_vertex() ? g.label(points[i].vertex)
                                          : detail::describe(sys, mu.level, points[i]);
        for (std::uint32_t rank = 0; rank < order.size(); ++rank) {
            if (side_of(sys, *order[rank], points[i]) == Side::Gt)
                vec.coords.push_back({rank, mu.support.at(*order[rank])});
        }
    });
    return out;
}

struct RatioWitness {
    std::string a, b;
    Rational ratio;
};

struct DistortionReport {
    int level = 0;
    std::size_t pair_count = 0;
    Rational min_ratio, max_ratio;  // l1 distance / star-chain distance
    RatioWitness argmin, argmax;
    std::vector<Rational> min_ratio_history;  // per level up to `level`
    bool upper_ok = false;     // max_ratio <= 1
    bool lower_ok = false;     // min_ratio > 0
    bool monotone_ok = false;  // comparable pairs sit at ratio exactly 1
    bool stability_ok = false; // min_ratio degrades at most geometrically
};

/// Ratios of the level-i cut metric against the star-chain metric of the
/// system truncated at level i, over all safe window vertex pairs.
inline DistortionReport distortion_report(const InverseSystem& sys, int level,
                                          std::vector<SubPoint> seeds = {}) {
    if (seeds.empty()) seeds = default_seeds(sys);
    SliceCalculus calc(sys);
    DistortionReport rep;
    rep.level = level;
    rep.upper_ok = rep.lower_ok = rep.monotone_ok = rep.stability_ok = true;

    Rational prev_min, prev_dbar_min;
    bool have_prev = false;
    for (int lvl = sys.first_level; lvl <= level; ++lvl) {
        const LevelGraph& g = sys.graph_at(lvl);
        std::vector<VertexId> pts;
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            if (sys.window.contains(g.height(v)) &&
                point_safe(sys, seeds, lvl, SubPoint::at_vertex(v)))
                pts.push_back(v);
        DbarEngine engine(sys, lvl);
        std::vector<std::vector<Rational>> dbar(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            auto all = engine.distances_from(pts[i]);
            dbar[i].resize(pts.size());
            for (std::size_t j = 0; j < pts.size(); ++j) dbar[i][j] = all[pts[j]];
        });

        struct PairResult {
            Rational ratio;
            bool monotone;
        };
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) pairs.push_back({i, j});
        if (pairs.empty()) {
            if (lvl == level)
                throw DomainError("distortion_report: no safe window vertex pairs at this level");
            continue;  // too coarse to carry safe pairs; the history starts later
        }
        std::vector<PairResult> results(pairs.size());
        parallel_for(pairs.size(), [&](std::size_t k) {
            auto [i, j] = pairs[k];
            const SubPoint a = SubPoint::at_vertex(pts[i]);
            const SubPoint b = SubPoint::at_vertex(pts[j]);
            const Rational l1 = calc.cut_distance(lvl, a, b, seeds);
            results[k].ratio = l1 / dbar[i][j];
            results[k].monotone = precedes(g, a, b) || precedes(g, b, a);
        });

        Rational lvl_min, lvl_max, lvl_dbar_min;
        bool first = true;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            auto [i, j] = pairs[k];
            const Rational& r = results[k].ratio;
            if (first || r < lvl_min) {
                lvl_min = r;
                if (lvl == level) rep.argmin = {g.label(pts[i]), g.label(pts[j]), r};
            }
            if (first || r > lvl_max) {
                lvl_max = r;
                if (lvl == level) rep.argmax = {g.label(pts[i]), g.label(pts[j]), r};
            }
            if (first || dbar[i][j] < lvl_dbar_min) lvl_dbar_min = dbar[i][j];
            first = false;
            if (results[k].monotone && !(r == Rational(1))) rep.monotone_ok = false;
        }
        rep.min_ratio_history.push_back(lvl_min);
        if (lvl == level) {
            rep.pair_count = pairs.size();
            rep.min_ratio = lvl_min;
            rep.max_ratio = lvl_max;
            rep.upper_ok = lvl_max <= Rational(1);
            rep.lower_ok = lvl_min > Rational(0);
        }
        // One diffusion step costs at most 8 m^-(l+1)/dbar_min of ratio.
        if (have_prev) {
            const Rational slack =
                8 * rational_pow(sys.base, -lvl) / prev_dbar_min;
            if (lvl_min < prev_min - slack) rep.stability_ok = false;
        }
        prev_min = lvl_min;
        prev_dbar_min = lvl_dbar_min;
        have_prev = true;
    }
    return rep;
}

struct GeodesicCheckReport {
    std::size_t pair_count = 0;
    std::vector<std::string> violations;
    bool pass() const { return violations.empty(); }
};

/// Every safe window vertex pair on a common maximal directed path must have
/// l1 distance == path metric == height difference, exactly.
inline GeodesicCheckReport geodesic_isometry_check(const InverseSystem& sys, int level,
                                                   std::vector<SubPoint> seeds = {}) {
    if (seeds.empty()) seeds = default_seeds(sys);
    SliceCalculus calc(sys);
    const LevelGraph& g = sys.graph_at(level);
    std::vector<VertexId> pts;
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (sys.window.contains(g.height(v)) && point_safe(sys, seeds, level, SubPoint::at_vertex(v)))
            pts.push_back(v);
    GeodesicCheckReport rep;
    struct Item {
        VertexId a, b;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            if (precedes(g, SubPoint::at_vertex(pts[i]), SubPoint::at_vertex(pts[j])))
                items.push_back({pts[i], pts[j]});
        }
    std::vector<std::string> bad(items.size());
    parallel_for(items.size(), [&](std::size_t k) {
        const SubPoint a = SubPoint::at_vertex(items[k].a);
        const SubPoint b = SubPoint::at_vertex(items[k].b);
        const Rational want = g.height(items[k].b) - g.height(items[k].a);
        const Rational l1 = calc.cut_distance(level, a, b, seeds);
        auto pm = path_metric(g, a, b);
        if (!(l1 == want) || !pm || !(*pm == want))
            bad[k] = g.label(items[k].a) + " -> " + g.label(items[k].b) + ": l1 " + to_string(l1) +
                     ", path " + (pm ? to_string(*pm) : "inf") + ", height gap " + to_string(want);
    });
    rep.pair_count = items.size();
    for (auto& s : bad)
        if (!s.empty()) rep.violations.push_back(std::move(s));
    return rep;
}

}  // namespace l1weaver
