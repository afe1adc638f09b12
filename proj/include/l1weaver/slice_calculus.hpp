#pragma once

#include "slices.hpp"

#include <array>
#include <vector>

namespace l1weaver {

/// Joint law of the final sides of an ordered point pair under the diffused
/// slice measure (masses, not probabilities: they sum to the seed mass used).
struct SideLaw {
    Rational leq_leq, leq_gt, gt_leq, gt_gt;
    Rational separation() const { return leq_gt + gt_leq; }
    Rational total() const { return leq_leq + leq_gt + gt_leq + gt_gt; }
};

/// Exact per-query evaluation of the diffused slice measures.
///
/// A fixed point can only change its side against a diffusing slice inside
/// the open star of the slice element nearest to it, and slice pieces over
/// distinct sites live in disjoint trimmed stars. The law of the pair
/// (side of x1, side of x2) therefore evolves level by level through a tiny
/// state space: each point is either frozen on a side or tracks the unique
/// element whose open subdivision star contains its projection. This
/// evaluates containment masses and cut distances at any level without
/// materializing the (combinatorially exploding) support.
class SliceCalculus {
public:
    explicit SliceCalculus(const InverseSystem& sys) : sys_(sys) {
        fibers_.resize(sys.projections.size());
        for (std::size_t k = 0; k < sys.projections.size(); ++k) {
            const auto& vm = sys.projections[k].vertex_map;
            for (VertexId w = 0; w < vm.size(); ++w) fibers_[k][vm[w].key()].push_back(w);
        }
        // Child menus for every interior vertex, so queries never allocate them.
        menus_.resize(sys.levels.size());
        for (std::size_t k = 1; k < sys.levels.size(); ++k) {
            const LevelGraph& g = sys.levels[k];
            menus_[k].resize(g.vertex_count());
            for (VertexId v = 0; v < g.vertex_count(); ++v)
                if (!g.out_edges(v).empty() && !g.in_edges(v).empty())
                    menus_[k][v] = children_of_vertex(sys, sys.first_level + static_cast<int>(k), v);
        }
    }

    /// Mass of slices through the subdivision vertex p at `level`.
    Rational containment_mass(int level, const SubPoint& p,
                              const std::vector<SubPoint>& seeds) const {
        if (!(p.is_vertex() || p.depth == 1))
            throw DomainError("containment_mass: p must be a subdivision vertex");
        Rational out(0);
        const Rational w0 = rational_pow(sys_.base, -(sys_.first_level + 1));
        for (const SubPoint& s : seeds)
            out += w0 * descendant_containment(seed_slice(s), level, p);
        return out;
    }

    /// P[p belongs to the level-`level` descendant of `start`].
    Rational descendant_containment(const PartialSlice& start, int level,
                                    const SubPoint& p) const {
        auto states = run_single(start, level, p);
        Rational mass(0);
        for (const auto& [st, w] : states)
            if (st.kind == PtState::Active && st.anchor == p) mass += w;
        return mass;
    }

    /// Joint side law of (x1, x2) at `level` under the seeded measure.
    SideLaw pair_law(int level, const SubPoint& x1, const SubPoint& x2,
                     const std::vector<SubPoint>& seeds) const {
        SideLaw law{Rational(0), Rational(0), Rational(0), Rational(0)};
        const Rational w0 = rational_pow(sys_.base, -(sys_.first_level + 1));
        for (const SubPoint& s : seeds) {
            SideLaw part = descendant_pair_law(seed_slice(s), level, x1, x2);
            law.leq_leq += w0 * part.leq_leq;
            law.leq_gt += w0 * part.leq_gt;
            law.gt_leq += w0 * part.gt_leq;
            law.gt_gt += w0 * part.gt_gt;
        }
        return law;
    }

    /// Joint side law of (x1, x2) against the descendant of a start slice.
    SideLaw descendant_pair_law(const PartialSlice& start, int level, const SubPoint& x1,
                                const SubPoint& x2) const {
        auto c1 = projection_chain(level, x1);
        auto c2 = projection_chain(level, x2);
        std::vector<JointEntry> states{
            {initial_state(start, c1[idx(start.level)]), initial_state(start, c2[idx(start.level)]),
             Rational(1)}};
        for (int lvl = start.level; lvl < level; ++lvl)
            states = advance(states, lvl, c1[idx(lvl + 1)], c2[idx(lvl + 1)]);
        SideLaw law{Rational(0), Rational(0), Rational(0), Rational(0)};
        const LevelGraph& g = sys_.graph_at(level);
        for (const auto& e : states) {
            const Side s1 = final_side(g, e.s1, c1[idx(level)]);
            const Side s2 = final_side(g, e.s2, c2[idx(level)]);
            if (s1 == Side::Leq && s2 == Side::Leq) law.leq_leq += e.w;
            else if (s1 == Side::Leq) law.leq_gt += e.w;
            else if (s2 == Side::Leq) law.gt_leq += e.w;
            else law.gt_gt += e.w;
        }
        return law;
    }

    /// Exact cut distance at `level` between two points of that level.
    Rational cut_distance(int level, const SubPoint& x1, const SubPoint& x2,
                          const std::vector<SubPoint>& seeds) const {
        if (x1 == x2) return Rational(0);
        return pair_law(level, x1, x2, seeds).separation();
    }

private:
    struct PtState {
        enum Kind : std::uint8_t { FrozenLeq, FrozenGt, Active } kind = FrozenLeq;
        SubPoint anchor;

        std::uint64_t key() const {
            if (kind != Active) return kind;
            return (anchor.key() << 2) | 2u | (kind == Active ? 1u : 0u);
        }
        bool operator==(const PtState& o) const {
            return kind == o.kind && (kind != Active || anchor == o.anchor);
        }
    };
    struct JointEntry {
        PtState s1, s2;
        Rational w;
    };

    int idx(int level) const { return sys_.index_of(level); }

    PartialSlice seed_slice(const SubPoint& s) const {
        return make_partial_slice(sys_.first_level, {s});
    }

    std::vector<SubPoint> projection_chain(int level, const SubPoint& p) const {
        std::vector<SubPoint> chain(idx(level) + 1);
        chain[idx(level)] = p;
        for (int l = level; l > sys_.first_level; --l)
            chain[idx(l) - 1] = project_step(sys_, l, chain[idx(l)]);
        return chain;
    }

    /// Initial state of a point against the start slice at its level.
    PtState initial_state(const PartialSlice& start, const SubPoint& p) const {
        const LevelGraph& g = sys_.graph_at(start.level);
        for (const SubPoint& e : start.elements)
            if (in_open_star_prime(g, e, p)) return PtState{PtState::Active, e};
        bool leq = false, gt = false;
        for (const SubPoint& e : start.elements) {
            if (precedes(g, p, e)) leq = true;
            if (precedes(g, e, p)) gt = true;
        }
        if (leq == gt)
            throw DomainError("point is unrelated to the start slice (not a valid slice?)");
        return PtState{leq ? PtState::FrozenLeq : PtState::FrozenGt, SubPoint{}};
    }

    /// The unique next-level site whose choice moves the boundary near the
    /// point; or a frozen side when the point already fell off every site's
    /// open star.
    struct Located {
        bool active = false;
        VertexId site = kNoVertex;
        PtState frozen;
    };
    Located locate_site(int level, const SubPoint& anchor, const SubPoint& p_up) const {
        const LevelGraph& up = sys_.graph_at(level + 1);
        Located loc;
        VertexId closed_hit = kNoVertex;
        const auto& fiber_map = fibers_[idx(level)];
        auto it = fiber_map.find(anchor.key());
        if (it == fiber_map.end())
            throw Error("slice element has no preimage vertex; system truncated too early");
        for (VertexId w : it->second) {
            if (in_open_star(up, p_up, w)) {
                if (loc.active) throw Error("ambiguous site: open stars overlap over one element");
                loc.active = true;
                loc.site = w;
            } else if (in_closed_star(up, p_up, w)) {
                closed_hit = w;
            }
        }
        if (loc.active) return loc;
        if (closed_hit == kNoVertex)
            throw Error("point escaped the fiber of its anchor; projection inconsistent");
        const bool above = precedes(up, SubPoint::at_vertex(closed_hit), p_up);
        const bool below = precedes(up, p_up, SubPoint::at_vertex(closed_hit));
        if (above == below) throw Error("boundary vertex unrelated to its site");
        loc.frozen = PtState{above ? PtState::FrozenGt : PtState::FrozenLeq, SubPoint{}};
        return loc;
    }

    /// State after the site picked child piece `piece`.
    PtState next_state(int next_level, const PartialSlice& piece, const SubPoint& p_up) const {
        const LevelGraph& up = sys_.graph_at(next_level);
        const SubPoint* hit = nullptr;
        for (const SubPoint& e : piece.elements) {
            if (in_open_star_prime(up, e, p_up)) {
                if (hit) throw Error("ambiguous anchor: overlapping element stars in one piece");
                hit = &e;
            }
        }
        if (hit) return PtState{PtState::Active, *hit};
        bool leq = false, gt = false;
        for (const SubPoint& e : piece.elements) {
            if (precedes(up, p_up, e)) leq = true;
            if (precedes(up, e, p_up)) gt = true;
        }
        if (leq == gt) throw Error("point unrelated to the local piece");
        return PtState{leq ? PtState::FrozenLeq : PtState::FrozenGt, SubPoint{}};
    }

    std::vector<JointEntry> advance(const std::vector<JointEntry>& states, int level,
                                    const SubPoint& p1_up, const SubPoint& p2_up) const {
        std::vector<JointEntry> out;
        auto add = [&](const PtState& a, const PtState& b, const Rational& w) {
            for (auto& e : out)
                if (e.s1 == a && e.s2 == b) {
                    e.w += w;
                    return;
                }
            out.push_back(JointEntry{a, b, w});
        };

        for (const auto& entry : states) {
            Located l1, l2;
            if (entry.s1.kind == PtState::Active) l1 = locate_site(level, entry.s1.anchor, p1_up);
            if (entry.s2.kind == PtState::Active) l2 = locate_site(level, entry.s2.anchor, p2_up);

            const bool act1 = entry.s1.kind == PtState::Active && l1.active;
            const bool act2 = entry.s2.kind == PtState::Active && l2.active;

            if (act1 && act2 && l1.site == l2.site) {
                // One shared site: the same child choice moves both points.
                for (const auto& [piece, w] : menu(level + 1, l1.site))
                    add(next_state(level + 1, piece, p1_up), next_state(level + 1, piece, p2_up),
                        entry.w * w);
                continue;
            }

            auto branch = [&](const PtState& st, const Located& loc, const SubPoint& p_up) {
                std::vector<std::pair<PtState, Rational>> dist;
                if (st.kind != PtState::Active) {
                    dist.push_back({st, Rational(1)});
                } else if (!loc.active) {
                    dist.push_back({loc.frozen, Rational(1)});
                } else {
                    for (const auto& [piece, w] : menu(level + 1, loc.site))
                        dist.push_back({next_state(level + 1, piece, p_up), w});
                }
                return dist;
            };
            // Distinct sites sit in disjoint trimmed stars: independent choices.
            for (const auto& [a, wa] : branch(entry.s1, l1, p1_up))
                for (const auto& [b, wb] : branch(entry.s2, l2, p2_up))
                    add(a, b, entry.w * wa * wb);
        }
        return out;
    }

    /// Single-point run (used for containment masses).
    std::vector<std::pair<PtState, Rational>> run_single(const PartialSlice& start, int level,
                                                         const SubPoint& p) const {
        auto chain = projection_chain(level, p);
        std::vector<std::pair<PtState, Rational>> states{
            {initial_state(start, chain[idx(start.level)]), Rational(1)}};
        for (int lvl = start.level; lvl < level; ++lvl) {
            std::vector<std::pair<PtState, Rational>> out;
            auto add = [&](const PtState& st, const Rational& w) {
                for (auto& e : out)
                    if (e.first == st) {
                        e.second += w;
                        return;
                    }
                out.push_back({st, w});
            };
            const SubPoint& p_up = chain[idx(lvl + 1)];
            for (const auto& [st, w] : states) {
                if (st.kind != PtState::Active) {
                    add(st, w);
                    continue;
                }
                Located loc = locate_site(lvl, st.anchor, p_up);
                if (!loc.active) {
                    add(loc.frozen, w);
                    continue;
                }
                for (const auto& [piece, cw] : menu(lvl + 1, loc.site))
                    add(next_state(lvl + 1, piece, p_up), w * cw);
            }
            states = std::move(out);
        }
        return states;
    }

    static Side final_side(const LevelGraph& g, const PtState& st, const SubPoint& p) {
        if (st.kind == PtState::FrozenLeq) return Side::Leq;
        if (st.kind == PtState::FrozenGt) return Side::Gt;
        if (p == st.anchor || precedes(g, p, st.anchor)) return Side::Leq;
        if (precedes(g, st.anchor, p)) return Side::Gt;
        throw Error("active anchor unrelated to its point at the final level");
    }

    const std::vector<std::pair<PartialSlice, Rational>>& menu(int level, VertexId site) const {
        const auto& cached = menus_[idx(level)][site];
        if (cached.empty())  // boundary vertex: surface the standard error
            throw DomainError("children_of_vertex: vertex '" +
                              sys_.graph_at(level).label(site) + "' at level " +
                              std::to_string(level) +
                              " lacks incoming or outgoing edges (outside the safe region)");
        return cached;
    }

    const InverseSystem& sys_;
    std::vector<std::unordered_map<std::uint64_t, std::vector<VertexId>>> fibers_;
    std::vector<std::vector<std::vector<std::pair<PartialSlice, Rational>>>> menus_;
};

}  // namespace l1weaver
