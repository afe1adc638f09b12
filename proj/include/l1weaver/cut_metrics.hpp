#pragma once

#include "parallel.hpp"
#include "slice_calculus.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace l1weaver {

struct InvalidSlice : Error {
    explicit InvalidSlice(const std::string& what) : Error(what) {}
};

/// Side classification of a point against a slice of the same level.
/// Membership counts as Leq; a valid slice relates every point exactly one way.
inline Side side_of(const InverseSystem& sys, const PartialSlice& s, const SubPoint& x) {
    const LevelGraph& g = sys.graph_at(s.level);
    bool leq = false, gt = false;
    for (const SubPoint& w : s.elements) {
        if (x == w || precedes(g, x, w)) leq = true;
        if (precedes(g, w, x) && !(w == x)) gt = true;
    }
    if (leq && gt) throw InvalidSlice("point lies strictly between two slice elements");
    if (!leq && !gt) throw InvalidSlice("point unrelated to every slice element");
    return leq ? Side::Leq : Side::Gt;
}

inline bool separates(const InverseSystem& sys, const PartialSlice& s, const SubPoint& x1,
                      const SubPoint& x2) {
    const Side t1 = side_of(sys, s, x1);
    const Side t2 = side_of(sys, s, x2);
    return t1 != t2;
}

inline void require_window_sufficient(const InverseSystem& sys,
                                      const std::vector<SubPoint>& seeds, int level,
                                      const SubPoint& x) {
    if (!point_safe(sys, seeds, level, x))
        throw DomainError(
            "query point projects outside the seeded region; its cut distances would be "
            "silently truncated");
}

/// Cut distance from an explicit measure: total mass of the supported slices
/// separating the two points.
inline Rational cut_distance(const InverseSystem& sys, const SliceMeasure& mu, const SubPoint& x1,
                             const SubPoint& x2) {
    if (!mu.seeds.empty()) {
        require_window_sufficient(sys, mu.seeds, mu.level, x1);
        require_window_sufficient(sys, mu.seeds, mu.level, x2);
    }
    if (x1 == x2) return Rational(0);
    Rational d(0);
    for (const auto& [s, w] : mu.support)
        if (separates(sys, s, x1, x2)) d += w;
    return d;
}

/// Cut distance through the per-query calculus (no materialized support).
inline Rational cut_distance_exact(const InverseSystem& sys, int level, const SubPoint& x1,
                                   const SubPoint& x2, const std::vector<SubPoint>& seeds,
                                   const SliceCalculus* calc = nullptr) {
    require_window_sufficient(sys, seeds, level, x1);
    require_window_sufficient(sys, seeds, level, x2);
    if (x1 == x2) return Rational(0);
    if (calc) return calc->cut_distance(level, x1, x2, seeds);
    return SliceCalculus(sys).cut_distance(level, x1, x2, seeds);
}

struct EstimateCheck {
    std::string name;
    bool pass = true;
    std::uint64_t cases = 0;
    Rational worst_value;  // meaning depends on the check; see `note`
    Rational bound;
    std::string worst_witness;
    std::string note;
};

struct EstimateReport {
    int up_to_level = 0;
    Rational a_emp;  // empirical separation constant (min normalized distance)
    std::vector<EstimateCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const EstimateCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

struct EstimateOptions {
    int up_to_level = 2;
    int explicit_cap = 1;  // deepest level for enumeration-based cross checks
    std::vector<SubPoint> seeds;
    std::size_t support_limit = kDefaultSupportLimit;
};

namespace detail {

struct PairQuery {
    int level;            // measure level
    SubPoint a, b;        // points of that level
    Rational bound;       // asserted bound (upper checks)
    int scale_level;      // the i in m^-i for witness text
    std::string context;
};

inline std::string describe(const InverseSystem& sys, int level, const SubPoint& p) {
    const LevelGraph& g = sys.graph_at(level);
    std::ostringstream os;
    if (p.is_vertex()) {
        os << g.label(p.vertex);
    } else {
        os << "edge" << p.edge << "@" << p.num << "/m^" << int(p.depth);
    }
    os << "(h=" << to_string(subpoint_height(g, p)) << ")";
    return os.str();
}

}  // namespace detail

/// Exhaustively checks the structural estimates of the diffused measures up to
/// `up_to_level`: per-vertex normalization, the edge and star upper bounds,
/// the one-step increment bound, one-step persistence of sides and of
/// separation (on explicitly enumerated measures), and the separation lower
/// bound whose best constant is reported as a_emp. Failures are findings, not
/// errors.
inline EstimateReport verify_estimates(const InverseSystem& sys, const EstimateOptions& opts) {
    const int m = sys.base;
    const int L = opts.up_to_level;
    sys.index_of(L);
    std::vector<SubPoint> seeds = opts.seeds.empty() ? default_seeds(sys) : opts.seeds;
    SliceCalculus calc(sys);

    EstimateReport rep;
    rep.up_to_level = L;

    // Projection chains for the coarse vertices of every level.
    std::vector<std::vector<std::vector<SubPoint>>> chain(L - sys.first_level + 1);
    for (int l = sys.first_level; l <= L; ++l) {
        const LevelGraph& g = sys.graph_at(l);
        auto& rows = chain[sys.index_of(l)];
        rows.assign(g.vertex_count(), {});
        for (VertexId v = 0; v < g.vertex_count(); ++v) {
            auto& row = rows[v];
            row.resize(sys.index_of(l) + 1);
            row[sys.index_of(l)] = SubPoint::at_vertex(v);
            for (int k = l; k > sys.first_level; --k)
                row[sys.index_of(k) - 1] = project_step(sys, k, row[sys.index_of(k)]);
        }
    }
    std::vector<std::vector<char>> safe(L - sys.first_level + 1);
    for (int l = sys.first_level; l <= L; ++l) {
        const LevelGraph& g = sys.graph_at(l);
        safe[sys.index_of(l)].assign(g.vertex_count(), 0);
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            safe[sys.index_of(l)][v] = point_safe(sys, seeds, l, SubPoint::at_vertex(v));
    }

    // --- Normalization: mass through every safe subdivision vertex.
    {
        EstimateCheck check;
        check.name = "normalization";
        check.note = "max |mass - m^-(i+1)| over safe subdivision vertices";
        check.bound = Rational(0);
        check.worst_value = Rational(0);
        for (int l = sys.first_level; l <= L; ++l) {
            const LevelGraph& g = sys.graph_at(l);
            std::vector<SubPoint> pts;
            for (const SubPoint& p : subdivision_vertices(g))
                if (point_safe(sys, seeds, l, p)) pts.push_back(p);
            const Rational expect = rational_pow(m, -(l + 1));
            std::vector<Rational> mass(pts.size());
            parallel_for(pts.size(),
                         [&](std::size_t i) { mass[i] = calc.containment_mass(l, pts[i], seeds); });
            for (std::size_t i = 0; i < pts.size(); ++i) {
                ++check.cases;
                const Rational err = mass[i] > expect ? mass[i] - expect : expect - mass[i];
                if (err > check.worst_value) {
                    check.worst_value = err;
                    check.worst_witness =
                        "level " + std::to_string(l) + " " + detail::describe(sys, l, pts[i]);
                }
            }
        }
        check.pass = check.worst_value == Rational(0);
        rep.checks.push_back(std::move(check));
    }

    // Helper to run a batch of upper-bound pair queries in parallel.
    auto run_upper = [&](const std::string& name, const std::string& note,
                         std::vector<detail::PairQuery> queries) {
        EstimateCheck check;
        check.name = name;
        check.note = note;
        check.worst_value = Rational(0);  // max of distance/bound ratios
        check.bound = Rational(1);
        std::vector<Rational> dist(queries.size());
        parallel_for(queries.size(), [&](std::size_t i) {
            dist[i] = calc.cut_distance(queries[i].level, queries[i].a, queries[i].b, seeds);
        });
        for (std::size_t i = 0; i < queries.size(); ++i) {
            ++check.cases;
            const Rational ratio = dist[i] / queries[i].bound;
            if (ratio > check.worst_value) {
                check.worst_value = ratio;
                check.worst_witness = queries[i].context;
            }
        }
        check.pass = check.worst_value <= Rational(1);
        rep.checks.push_back(std::move(check));
    };

    // --- Edge bound: projections in one closed edge of level i.
    {
        std::vector<detail::PairQuery> queries;
        for (int j = sys.first_level; j <= L; ++j) {
            const LevelGraph& gj = sys.graph_at(j);
            for (int i = sys.first_level; i <= j; ++i) {
                const LevelGraph& gi = sys.graph_at(i);
                std::vector<std::vector<VertexId>> members(gi.edge_count());
                for (VertexId v = 0; v < gj.vertex_count(); ++v) {
                    const SubPoint& p = chain[sys.index_of(j)][v][sys.index_of(i)];
                    if (p.is_vertex()) {
                        for (EdgeId e : gi.out_edges(p.vertex)) members[e].push_back(v);
                        for (EdgeId e : gi.in_edges(p.vertex)) members[e].push_back(v);
                    } else {
                        members[p.edge].push_back(v);
                    }
                }
                const Rational bound = rational_pow(m, -i);
                for (EdgeId e = 0; e < gi.edge_count(); ++e)
                    for (std::size_t a = 0; a < members[e].size(); ++a)
                        for (std::size_t b = a + 1; b < members[e].size(); ++b)
                            queries.push_back({j, SubPoint::at_vertex(members[e][a]),
                                               SubPoint::at_vertex(members[e][b]), bound, i,
                                               "level " + std::to_string(j) + " pair over edge " +
                                                   std::to_string(e) + " of level " +
                                                   std::to_string(i)});
            }
        }
        run_upper("edge-bound", "max cut distance / m^-i over common-edge pairs",
                  std::move(queries));
    }

    // --- Star bound: projections in one closed star of level i.
    {
        std::vector<detail::PairQuery> queries;
        for (int j = sys.first_level; j <= L; ++j) {
            const LevelGraph& gj = sys.graph_at(j);
            for (int i = sys.first_level; i <= j; ++i) {
                const LevelGraph& gi = sys.graph_at(i);
                std::vector<std::vector<VertexId>> members(gi.vertex_count());
                for (VertexId v = 0; v < gj.vertex_count(); ++v) {
                    const SubPoint& p = chain[sys.index_of(j)][v][sys.index_of(i)];
                    if (p.is_vertex()) {
                        members[p.vertex].push_back(v);
                        for (EdgeId e : gi.out_edges(p.vertex))
                            members[gi.edge(e).head].push_back(v);
                        for (EdgeId e : gi.in_edges(p.vertex))
                            members[gi.edge(e).tail].push_back(v);
                    } else {
                        members[gi.edge(p.edge).tail].push_back(v);
                        members[gi.edge(p.edge).head].push_back(v);
                    }
                }
                const Rational bound = 2 * rational_pow(m, -i);
                for (VertexId c = 0; c < gi.vertex_count(); ++c)
                    for (std::size_t a = 0; a < members[c].size(); ++a)
                        for (std::size_t b = a + 1; b < members[c].size(); ++b)
                            queries.push_back({j, SubPoint::at_vertex(members[c][a]),
                                               SubPoint::at_vertex(members[c][b]), bound, i,
                                               "level " + std::to_string(j) + " pair in star of " +
                                                   gi.label(c) + " at level " + std::to_string(i)});
            }
        }
        run_upper("star-bound", "max cut distance / 2m^-i over common-star pairs",
                  std::move(queries));
    }

    // --- Increment bound: one level of diffusion moves any pair distance by
    // at most 4m^-(i+1).
    {
        EstimateCheck check;
        check.name = "increment-bound";
        check.note = "max |d_(i+1)(lift) - d_i| / 4m^-(i+1) over safe lifted pairs";
        check.bound = Rational(1);
        check.worst_value = Rational(0);
        struct Item {
            int lup;
            VertexId a, b;
        };
        std::vector<Item> items;
        for (int l = sys.first_level + 1; l <= L; ++l) {
            const LevelGraph& g = sys.graph_at(l);
            for (VertexId a = 0; a < g.vertex_count(); ++a) {
                if (!safe[sys.index_of(l)][a]) continue;
                for (VertexId b = a + 1; b < g.vertex_count(); ++b)
                    if (safe[sys.index_of(l)][b]) items.push_back({l, a, b});
            }
        }
        std::vector<Rational> ratios(items.size());
        parallel_for(items.size(), [&](std::size_t i) {
            const auto& it = items[i];
            const SubPoint pa = SubPoint::at_vertex(it.a), pb = SubPoint::at_vertex(it.b);
            const Rational up = calc.cut_distance(it.lup, pa, pb, seeds);
            const SubPoint qa = chain[sys.index_of(it.lup)][it.a][sys.index_of(it.lup) - 1];
            const SubPoint qb = chain[sys.index_of(it.lup)][it.b][sys.index_of(it.lup) - 1];
            const Rational dn = calc.cut_distance(it.lup - 1, qa, qb, seeds);
            const Rational diff = up > dn ? up - dn : dn - up;
            ratios[i] = diff / (4 * rational_pow(m, -it.lup));
        });
        for (std::size_t i = 0; i < items.size(); ++i) {
            ++check.cases;
            if (ratios[i] > check.worst_value) {
                check.worst_value = ratios[i];
                const LevelGraph& g = sys.graph_at(items[i].lup);
                check.worst_witness = "level " + std::to_string(items[i].lup) + " pair " +
                                      g.label(items[i].a) + " , " + g.label(items[i].b);
            }
        }
        check.pass = check.worst_value <= Rational(1);
        rep.checks.push_back(std::move(check));
    }

    // --- One-step persistence checks on explicitly enumerated measures.
    {
        EstimateCheck sides;
        sides.name = "side-persistence";
        sides.note = "side flips outside the open stars of the slice (must be none)";
        sides.worst_value = Rational(0);
        sides.bound = Rational(0);

        EstimateCheck sep;
        sep.name = "separation-persistence";
        sep.note = "min one-step separating child mass over weakly separated pairs";
        sep.worst_value = Rational(2);  // min: start above any real value
        sep.bound = Rational(0);
        bool sep_any = false;

        for (int l = sys.first_level; l <= std::min(opts.explicit_cap, L - 1); ++l) {
            if (l + 1 > sys.top_level()) break;
            SliceMeasure mu = sigma_prime(sys, l, seeds, opts.support_limit);
            const LevelGraph& g = sys.graph_at(l);
            const LevelGraph& up = sys.graph_at(l + 1);
            const Projection& pr = sys.projection_down_to(l);
            std::vector<std::vector<VertexId>> lifts(g.vertex_count());
            for (VertexId w = 0; w < up.vertex_count(); ++w) {
                const SubPoint& im = pr.vertex_map[w];
                if (im.is_vertex()) lifts[im.vertex].push_back(w);
            }
            for (const auto& [s, w] : mu.support) {
                auto children = children_of_slice(sys, s);
                // Vertices clear of every element's open subdivision star.
                for (VertexId x = 0; x < g.vertex_count(); ++x) {
                    const SubPoint px = SubPoint::at_vertex(x);
                    bool inside = false;
                    for (const SubPoint& e : s.elements)
                        if (in_open_star_prime(g, e, px)) inside = true;
                    if (inside) continue;
                    const Side tag = side_of(sys, s, px);
                    for (const auto& [child, cw] : children.support) {
                        for (VertexId xl : lifts[x]) {
                            ++sides.cases;
                            if (side_of(sys, child, SubPoint::at_vertex(xl)) != tag) {
                                sides.pass = false;
                                sides.worst_value = Rational(1);
                                sides.worst_witness = "level " + std::to_string(l) + " vertex " +
                                                      g.label(x) + " flips side";
                            }
                        }
                    }
                }
                // Weakly separated safe vertex pairs with x2 clear of the stars.
                for (VertexId x1 = 0; x1 < g.vertex_count(); ++x1) {
                    if (!safe[sys.index_of(l)][x1]) continue;
                    for (VertexId x2 = 0; x2 < g.vertex_count(); ++x2) {
                        if (x1 == x2 || !safe[sys.index_of(l)][x2]) continue;
                        const SubPoint p1 = SubPoint::at_vertex(x1), p2 = SubPoint::at_vertex(x2);
                        bool x2_clear = true;
                        for (const SubPoint& e : s.elements)
                            if (in_open_star_prime(g, e, p2)) x2_clear = false;
                        if (!x2_clear) continue;
                        if (!(side_of(sys, s, p1) == Side::Leq && side_of(sys, s, p2) == Side::Gt))
                            continue;
                        for (VertexId l1 : lifts[x1])
                            for (VertexId l2 : lifts[x2]) {
                                Rational separated(0);
                                for (const auto& [child, cw] : children.support) {
                                    const SubPoint q1 = SubPoint::at_vertex(l1);
                                    const SubPoint q2 = SubPoint::at_vertex(l2);
                                    bool member = false;
                                    for (const SubPoint& e : child.elements)
                                        if (e == q1) member = true;
                                    if (!member &&
                                        side_of(sys, child, q1) == Side::Leq &&
                                        side_of(sys, child, q2) == Side::Gt)
                                        separated += cw;
                                }
                                ++sep.cases;
                                sep_any = true;
                                if (separated < sep.worst_value) {
                                    sep.worst_value = separated;
                                    sep.worst_witness = "level " + std::to_string(l) + " pair " +
                                                        g.label(x1) + " , " + g.label(x2);
                                }
                            }
                    }
                }
            }
        }
        sides.pass = sides.pass && sides.worst_value == Rational(0);
        sep.pass = sep_any ? sep.worst_value > Rational(0) : true;
        rep.checks.push_back(std::move(sides));
        rep.checks.push_back(std::move(sep));
    }

    // --- Separation lower bound: lifted pairs of trimmed-star-separated
    // vertices keep cut distance >= a_emp * m^-(i+2).
    {
        EstimateCheck check;
        check.name = "separation-lower-bound";
        check.note = "a_emp = min cut distance * m^(i+2) over qualifying lifted pairs";
        check.bound = Rational(0);
        struct Item {
            int i, j;
            VertexId a, b;  // lifts at level j
            std::string context;
        };
        std::vector<Item> items;
        for (int i = sys.first_level; i < L; ++i) {
            const LevelGraph& gi = sys.graph_at(i);
            // Distinct coarse vertices never share a trimmed star.
            for (int j = i + 1; j <= L; ++j) {
                const LevelGraph& gj = sys.graph_at(j);
                std::vector<std::vector<VertexId>> lifts(gi.vertex_count());
                for (VertexId w = 0; w < gj.vertex_count(); ++w) {
                    const SubPoint& im = chain[sys.index_of(j)][w][sys.index_of(i)];
                    if (im.is_vertex() && safe[sys.index_of(j)][w]) lifts[im.vertex].push_back(w);
                }
                for (VertexId a = 0; a < gi.vertex_count(); ++a) {
                    if (!safe[sys.index_of(i)][a]) continue;
                    for (VertexId b = a + 1; b < gi.vertex_count(); ++b) {
                        if (!safe[sys.index_of(i)][b]) continue;
                        for (VertexId la : lifts[a])
                            for (VertexId lb : lifts[b])
                                items.push_back({i, j, la, lb,
                                                 "base level " + std::to_string(i) + " pair " +
                                                     gi.label(a) + " , " + gi.label(b) +
                                                     " lifted to level " + std::to_string(j)});
                    }
                }
            }
        }
        std::vector<Rational> vals(items.size());
        parallel_for(items.size(), [&](std::size_t k) {
            const auto& it = items[k];
            const Rational d = calc.cut_distance(it.j, SubPoint::at_vertex(it.a),
                                                 SubPoint::at_vertex(it.b), seeds);
            vals[k] = d * rational_pow(m, it.i + 2);
        });
        check.worst_value = Rational(-1);
        for (std::size_t k = 0; k < items.size(); ++k) {
            ++check.cases;
            if (check.worst_value < Rational(0) || vals[k] < check.worst_value) {
                check.worst_value = vals[k];
                check.worst_witness = items[k].context;
            }
        }
        check.pass = check.cases > 0 && check.worst_value > Rational(0);
        rep.a_emp = check.cases > 0 ? check.worst_value : Rational(0);
        rep.checks.push_back(std::move(check));
    }

    return rep;
}

struct SamplerCheck {
    std::size_t draws = 0;
    std::size_t targets = 0;
    double worst_sigma = 0.0;  // max |freq - p| / sqrt(p(1-p)/n)
    bool within_3_sigma = false;
    bool deterministic = false;  // same seed, identical draw stream
};

/// Monte Carlo consistency: empirical containment frequencies of sampled
/// descendants against the exact marginals. The 3-sigma bound is a
/// per-vertex statement, so the check spot-checks a deterministic spread of
/// informative vertices rather than the maximum over hundreds of
/// simultaneous statistics (whose expected maximum already exceeds 3).
inline SamplerCheck sampler_consistency_check(const InverseSystem& sys, int level,
                                              std::size_t draws, std::uint64_t rng_seed,
                                              std::vector<SubPoint> seeds = {},
                                              std::size_t max_targets = 12) {
    if (seeds.empty()) seeds = default_seeds(sys);
    if (seeds.empty()) throw DomainError("sampler check: no seeds");
    SliceCalculus calc(sys);
    const PartialSlice start = make_partial_slice(sys.first_level, {seeds[seeds.size() / 2]});

    // Informative targets: exact conditional containment strictly inside (0,1).
    std::vector<SubPoint> targets;
    std::vector<Rational> exact;
    for (const SubPoint& p : subdivision_vertices(sys.graph_at(level))) {
        const Rational q = calc.descendant_containment(start, level, p);
        if (q > Rational(0) && q < Rational(1)) {
            targets.push_back(p);
            exact.push_back(q);
        }
    }
    if (max_targets > 0 && targets.size() > max_targets) {
        std::vector<SubPoint> t2;
        std::vector<Rational> e2;
        const std::size_t stride = targets.size() / max_targets;
        for (std::size_t i = 0; i < targets.size() && t2.size() < max_targets; i += stride) {
            t2.push_back(targets[i]);
            e2.push_back(exact[i]);
        }
        targets.swap(t2);
        exact.swap(e2);
    }

    SamplerCheck out;
    out.draws = draws;
    out.targets = targets.size();
    std::vector<std::size_t> hits(targets.size(), 0);
    for (std::size_t d = 0; d < draws; ++d) {
        PartialSlice s = sample_descendant(sys, start, level, rng_seed + d);
        for (std::size_t t = 0; t < targets.size(); ++t)
            for (const SubPoint& e : s.elements)
                if (e == targets[t]) {
                    ++hits[t];
                    break;
                }
    }
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const double p = to_double(exact[t]);
        const double freq = static_cast<double>(hits[t]) / static_cast<double>(draws);
        const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
        const double sigma = sd > 0 ? std::abs(freq - p) / sd : 0.0;
        out.worst_sigma = std::max(out.worst_sigma, sigma);
    }
    out.within_3_sigma = out.worst_sigma <= 3.0;

    out.deterministic = true;
    for (std::size_t d = 0; d < std::min<std::size_t>(draws, 64); ++d)
        if (!(sample_descendant(sys, start, level, rng_seed + d) ==
              sample_descendant(sys, start, level, rng_seed + d)))
            out.deterministic = false;
    return out;
}

/// Normalization re-check for an explicitly given measure (used to reject
/// corrupted measures and as a negative-control hook in tests).
inline EstimateCheck check_measure_normalization(const InverseSystem& sys,
                                                 const SliceMeasure& mu) {
    EstimateCheck check;
    check.name = "measure-normalization";
    check.note = "max |marginal - m^-(i+1)| over safe subdivision vertices";
    check.bound = Rational(0);
    check.worst_value = Rational(0);
    const Rational expect = rational_pow(sys.base, -(mu.level + 1));
    const LevelGraph& g = sys.graph_at(mu.level);
    for (const SubPoint& p : subdivision_vertices(g)) {
        if (!point_safe(sys, mu.seeds, mu.level, p)) continue;
        ++check.cases;
        const Rational got = mu.marginal(p);
        const Rational err = got > expect ? got - expect : expect - got;
        if (err > check.worst_value) {
            check.worst_value = err;
            check.worst_witness = detail::describe(sys, mu.level, p);
        }
    }
    check.pass = check.worst_value == Rational(0);
    return check;
}

}  // namespace l1weaver
