#pragma once

#include "builders.hpp"
#include "cut_metrics.hpp"
#include "embedding.hpp"
#include "factorization.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace l1weaver {

using Json = nlohmann::ordered_json;

inline Json rational_json(const Rational& r) { return to_string(r); }
inline Rational rational_from_json(const Json& j) {
    if (j.is_number_integer()) return Rational(static_cast<long long>(j.get<long long>()));
    if (j.is_string()) return parse_rational(j.get<std::string>());
    throw InputError("expected an exact rational (integer or \"p/q\" string)");
}

// ---------------------------------------------------------------- documents

inline Json subpoint_json(const SubPoint& p) {
    Json j;
    if (p.is_vertex()) {
        j["v"] = p.vertex;
    } else {
        j["e"] = p.edge;
        j["num"] = p.num;
        j["depth"] = p.depth;
    }
    return j;
}

inline SubPoint subpoint_from_json(const LevelGraph& g, const Json& j) {
    if (j.contains("v")) return SubPoint::at_vertex(j.at("v").get<VertexId>());
    return make_edge_point(g, j.at("e").get<EdgeId>(), j.at("num").get<std::uint64_t>(),
                           j.at("depth").get<int>());
}

inline Json gadget_json(const GadgetSpec& g) {
    Json j;
    j["base"] = g.base;
    j["vertices"] = Json::array();
    for (const auto& v : g.vertices) j["vertices"].push_back({{"name", v.name}, {"height", v.height_units}});
    j["edges"] = Json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"sub_index", e.sub_index}});
    return j;
}

inline GadgetSpec gadget_from_json(const Json& j) {
    GadgetSpec g;
    try {
        g.base = j.at("base").get<int>();
        for (const auto& v : j.at("vertices"))
            g.vertices.push_back({v.at("name").get<std::string>(), v.at("height").get<int>()});
        for (const auto& e : j.at("edges"))
            g.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                               e.at("sub_index").get<int>()});
    } catch (const Json::exception& ex) {
        throw InputError(std::string("gadget document: ") + ex.what());
    }
    validate_gadget(g);
    return g;
}

/// Recipe documents rebuild through the deterministic builders; explicit
/// documents carry the full graphs (used for factorization output).
inline Json system_to_json(const InverseSystem& sys, const Json& recipe = Json()) {
    Json j;
    j["format"] = 1;
    j["type"] = "inverse-system";
    if (!recipe.is_null()) {
        j["kind"] = "builtin";
        j["recipe"] = recipe;
        return j;
    }
    j["kind"] = "explicit";
    j["base"] = sys.base;
    j["first_level"] = sys.first_level;
    j["window"] = {rational_json(sys.window.lo), rational_json(sys.window.hi)};
    j["levels"] = Json::array();
    for (const LevelGraph& g : sys.levels) {
        Json lj;
        lj["level"] = g.level();
        lj["vertices"] = Json::array();
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            lj["vertices"].push_back({{"height", rational_json(g.height(v))}, {"label", g.label(v)}});
        lj["edges"] = Json::array();
        for (EdgeId e = 0; e < g.edge_count(); ++e)
            lj["edges"].push_back({{"tail", g.edge(e).tail}, {"head", g.edge(e).head}});
        j["levels"].push_back(std::move(lj));
    }
    j["projections"] = Json::array();
    for (std::size_t k = 0; k < sys.projections.size(); ++k) {
        Json pj;
        pj["vertex_map"] = Json::array();
        for (const SubPoint& p : sys.projections[k].vertex_map)
            pj["vertex_map"].push_back(subpoint_json(p));
        pj["edge_map"] = Json::array();
        for (auto [e, cell] : sys.projections[k].edge_map)
            pj["edge_map"].push_back({{"edge", e}, {"cell", cell}});
        j["projections"].push_back(std::move(pj));
    }
    return j;
}

inline Json builtin_recipe(const std::string& name, int depth, const Rational& collar,
                           const Interval& span, int base, const Json& gadget = Json()) {
    Json r;
    r["name"] = name;
    r["depth"] = depth;
    if (name == "line") {
        r["span"] = {rational_json(span.lo), rational_json(span.hi)};
        r["base"] = base;
    } else {
        r["collar"] = rational_json(collar);
    }
    if (!gadget.is_null()) r["gadget"] = gadget;
    return r;
}

inline InverseSystem build_from_recipe(const Json& recipe) {
    const std::string name = recipe.at("name").get<std::string>();
    const int depth = recipe.at("depth").get<int>();
    if (name == "laakso-split") {
        const Rational collar =
            recipe.contains("collar") ? rational_from_json(recipe.at("collar")) : Rational(1);
        return build_split(depth, collar);
    }
    if (name == "laakso-diamond") {
        const Rational collar =
            recipe.contains("collar") ? rational_from_json(recipe.at("collar")) : Rational(1);
        GadgetSpec gadget = recipe.contains("gadget") ? gadget_from_json(recipe.at("gadget"))
                                                      : GadgetSpec::laakso_diamond();
        return build_diamond(depth, collar, gadget);
    }
    if (name == "line") {
        Interval span{Rational(0), Rational(1)};
        if (recipe.contains("span"))
            span = Interval{rational_from_json(recipe.at("span")[0]),
                            rational_from_json(recipe.at("span")[1])};
        const int base = recipe.contains("base") ? recipe.at("base").get<int>() : 3;
        return build_line(depth, span, base);
    }
    throw InputError("unknown builtin system '" + name + "'");
}

/// Parses a system document; same document yields identical vertex and edge
/// ids (recipes rebuild deterministically, explicit graphs load verbatim).
inline InverseSystem load_system(const Json& doc) {
    try {
        if (doc.at("format").get<int>() != 1) throw InputError("unsupported document format");
        if (doc.at("type").get<std::string>() != "inverse-system")
            throw InputError("not an inverse-system document");
        const std::string kind = doc.at("kind").get<std::string>();
        if (kind == "builtin") return build_from_recipe(doc.at("recipe"));
        if (kind != "explicit") throw InputError("unknown document kind '" + kind + "'");

        InverseSystem sys;
        sys.base = doc.at("base").get<int>();
        sys.first_level = doc.at("first_level").get<int>();
        sys.window = Interval{rational_from_json(doc.at("window")[0]),
                              rational_from_json(doc.at("window")[1])};
        for (const auto& lj : doc.at("levels")) {
            LevelGraph g(lj.at("level").get<int>(), sys.base);
            for (const auto& vj : lj.at("vertices"))
                g.add_vertex(rational_from_json(vj.at("height")),
                             vj.value("label", std::string()));
            for (const auto& ej : lj.at("edges"))
                g.add_edge(ej.at("tail").get<VertexId>(), ej.at("head").get<VertexId>());
            g.finalize();
            sys.levels.push_back(std::move(g));
        }
        std::size_t k = 0;
        for (const auto& pj : doc.at("projections")) {
            if (k + 1 >= sys.levels.size()) throw InputError("too many projections");
            Projection pr;
            for (const auto& vm : pj.at("vertex_map"))
                pr.vertex_map.push_back(subpoint_from_json(sys.levels[k], vm));
            for (const auto& em : pj.at("edge_map"))
                pr.edge_map.push_back({em.at("edge").get<EdgeId>(), em.at("cell").get<std::uint32_t>()});
            sys.projections.push_back(std::move(pr));
            ++k;
        }
        auto rep = validate_admissible(sys);
        if (!rep.admissible()) throw InputError("document system invalid: " + rep.summary());
        return sys;
    } catch (const Json::exception& ex) {
        throw InputError(std::string("system document: ") + ex.what());
    }
}

// ---------------------------------------------------------------------- DOT

/// Graphviz export of one level: heights group vertices into ranks,
/// direction is carried by the arrowheads.
inline std::string to_dot(const LevelGraph& g) {
    std::ostringstream os;
    os << "digraph level" << g.level() << " {\n  rankdir=LR;\n  node [shape=circle];\n";
    std::map<Rational, std::vector<VertexId>> ranks;
    for (VertexId v = 0; v < g.vertex_count(); ++v) ranks[g.height(v)].push_back(v);
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        os << "  v" << v << " [label=\"" << (g.label(v).empty() ? std::to_string(v) : g.label(v))
           << "\\nh=" << to_string(g.height(v)) << "\"];\n";
    for (const auto& [h, members] : ranks) {
        os << "  { rank=same;";
        for (VertexId v : members) os << " v" << v << ";";
        os << " }\n";
    }
    for (EdgeId e = 0; e < g.edge_count(); ++e)
        os << "  v" << g.edge(e).tail << " -> v" << g.edge(e).head << ";\n";
    os << "}\n";
    return os.str();
}

// ------------------------------------------------------------------ reports

inline Json estimate_report_json(const EstimateReport& rep) {
    Json j;
    j["format"] = 1;
    j["type"] = "estimate-report";
    j["up_to_level"] = rep.up_to_level;
    j["a_emp"] = rational_json(rep.a_emp);
    j["all_pass"] = rep.all_pass();
    j["checks"] = Json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"name", c.name},
                               {"pass", c.pass},
                               {"cases", c.cases},
                               {"worst_value", rational_json(c.worst_value)},
                               {"bound", rational_json(c.bound)},
                               {"worst_witness", c.worst_witness},
                               {"note", c.note}});
    }
    return j;
}

inline Json distortion_report_json(const DistortionReport& rep) {
    Json j;
    j["format"] = 1;
    j["type"] = "distortion-report";
    j["level"] = rep.level;
    j["pair_count"] = rep.pair_count;
    j["min_ratio"] = rational_json(rep.min_ratio);
    j["max_ratio"] = rational_json(rep.max_ratio);
    j["argmin"] = {{"a", rep.argmin.a}, {"b", rep.argmin.b}, {"ratio", rational_json(rep.argmin.ratio)}};
    j["argmax"] = {{"a", rep.argmax.a}, {"b", rep.argmax.b}, {"ratio", rational_json(rep.argmax.ratio)}};
    j["min_ratio_history"] = Json::array();
    for (const auto& r : rep.min_ratio_history) j["min_ratio_history"].push_back(rational_json(r));
    j["upper_ok"] = rep.upper_ok;
    j["lower_ok"] = rep.lower_ok;
    j["monotone_ok"] = rep.monotone_ok;
    j["stability_ok"] = rep.stability_ok;
    return j;
}

inline Json factorization_report_json(const FactorizationReport& rep) {
    Json j;
    j["format"] = 1;
    j["type"] = "factorization-report";
    j["compatible"] = rep.compatible;
    j["height_identity"] = rep.height_identity;
    j["star_property"] = rep.star_property;
    j["finite"] = rep.finite;
    j["lprime"] = rational_json(rep.lprime);
    j["sup_dist_over_dbar"] = rational_json(rep.sup_dist_over_dbar);
    j["sup_dbar_over_dist"] = rational_json(rep.sup_dbar_over_dist);
    return j;
}

// --------------------------------------------------------------------- CSV

/// Embedding rows: point id, slice rank, exact value.
inline std::string embedding_csv(const std::vector<EmbeddingVector>& vectors) {
    std::ostringstream os;
    os << "point,slice,value\n";
    for (const auto& v : vectors)
        for (const auto& [rank, val] : v.coords)
            os << v.owner << "," << rank << "," << to_string(val) << "\n";
    return os.str();
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace detail

/// points.csv: one id per line. dist.csv: n rows of n exact rationals.
/// u.csv: one exact rational per line, aligned with points.csv.
inline FiniteMetricSpace load_metric_space(std::istream& points, std::istream& dist,
                                           std::istream& u) {
    FiniteMetricSpace x;
    std::string line;
    while (std::getline(points, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        x.ids.push_back(cells[0]);
    }
    const std::size_t n = x.ids.size();
    if (n == 0) throw InputError("points file: no points");
    std::size_t row = 0;
    while (std::getline(dist, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != n)
            throw InputError("distance matrix row " + std::to_string(row) + ": expected " +
                             std::to_string(n) + " entries");
        std::vector<Rational> r;
        for (const auto& c : cells) r.push_back(parse_rational(c));
        x.dist.push_back(std::move(r));
        ++row;
    }
    if (row != n) throw InputError("distance matrix: wrong number of rows");
    while (std::getline(u, line)) {
        if (line.empty() || line == "\r") continue;
        x.u.push_back(parse_rational(detail::split_csv_line(line)[0]));
    }
    if (x.u.size() != n) throw InputError("u file: wrong number of values");
    validate_metric_space(x);
    return x;
}

inline std::string factorization_maps_csv(const Factorization& fac,
                                          const FiniteMetricSpace& x) {
    std::ostringstream os;
    os << "level,point,kind,carrier,fraction,height\n";
    for (std::size_t li = 0; li < fac.maps.size(); ++li) {
        const int lvl = fac.system.first_level + static_cast<int>(li);
        const LevelGraph& g = fac.system.graph_at(lvl);
        for (std::size_t z = 0; z < x.size(); ++z) {
            const GraphPoint& p = fac.maps[li][z];
            os << lvl << "," << x.ids[z] << ",";
            if (p.at_vertex)
                os << "vertex," << g.label(p.vertex) << ",0";
            else
                os << "edge," << p.edge << "," << to_string(p.frac);
            os << "," << to_string(graph_point_height(g, p)) << "\n";
        }
    }
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << content;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file: " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& ex) {
        throw InputError("JSON parse error in " + path + ": " + ex.what());
    }
}

}  // namespace l1weaver
