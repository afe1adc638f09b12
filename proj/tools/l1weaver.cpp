// Command-line front end: build example systems, verify the measure
// estimates, emit exact l1 embeddings, and factor finite metric spaces
// through inverse systems of directed graphs.
//
// Exit codes: 0 success, 1 a verification check failed, 2 bad input.

#include <CLI11.hpp>
#include <l1weaver/io.hpp>

#include <iostream>
#include <optional>

using namespace l1weaver;

namespace {

struct SystemOpts {
    std::string builtin;
    std::string spec_path;
    int depth = 2;
    std::string collar = "1";
    std::string span = "0,1";
    int base = 3;
    std::string window;  // optional override "a,b"
    std::string seeds;   // optional override: comma list of first-level heights
};

void add_system_flags(CLI::App* cmd, SystemOpts& o) {
    cmd->add_option("--system", o.builtin, "builtin system: laakso-split | laakso-diamond | line");
    cmd->add_option("--spec", o.spec_path, "system document (JSON) to load instead of a builtin");
    cmd->add_option("--depth", o.depth, "number of refinement levels");
    cmd->add_option("--collar", o.collar, "collar length (positive integer, builtin systems)");
    cmd->add_option("--span", o.span, "line span a,b (line builtin)");
    cmd->add_option("--base", o.base, "subdivision arity m (line builtin)");
    cmd->add_option("--window", o.window, "override the window of interest: a,b");
    cmd->add_option("--slice-seeds", o.seeds,
                    "override the measure seeds: comma list of first-level heights");
}

Interval parse_interval(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos) throw InputError("expected an interval 'a,b'");
    return Interval{parse_rational(text.substr(0, comma)), parse_rational(text.substr(comma + 1))};
}

std::pair<InverseSystem, Json> make_system(const SystemOpts& o) {
    auto finish = [&](InverseSystem sys, Json doc) {
        if (!o.window.empty()) sys.window = parse_interval(o.window);
        return std::make_pair(std::move(sys), std::move(doc));
    };
    if (!o.spec_path.empty()) {
        Json doc = read_json_file(o.spec_path);
        return finish(load_system(doc), doc);
    }
    if (o.builtin == "laakso-split") {
        Json recipe = builtin_recipe("laakso-split", o.depth, parse_rational(o.collar), {}, 3);
        return finish(build_from_recipe(recipe), system_to_json(InverseSystem{}, recipe));
    }
    if (o.builtin == "laakso-diamond") {
        Json recipe = builtin_recipe("laakso-diamond", o.depth, parse_rational(o.collar), {}, 4);
        return finish(build_from_recipe(recipe), system_to_json(InverseSystem{}, recipe));
    }
    if (o.builtin == "line") {
        Interval span = parse_interval(o.span);
        Json recipe = builtin_recipe("line", o.depth, Rational(0), span, o.base);
        return finish(build_from_recipe(recipe), system_to_json(InverseSystem{}, recipe));
    }
    throw InputError("choose --system laakso-split|laakso-diamond|line or --spec FILE");
}

/// Resolve a seed-height list against the first-level subdivision vertices.
std::vector<SubPoint> resolve_seeds(const InverseSystem& sys, const std::string& text) {
    if (text.empty()) return default_seeds(sys);
    std::vector<SubPoint> out;
    const LevelGraph& g0 = sys.levels.front();
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const Rational h = parse_rational(text.substr(pos, comma - pos));
        bool found = false;
        for (const SubPoint& p : subdivision_vertices(g0))
            if (subpoint_height(g0, p) == h) {
                out.push_back(p);
                found = true;
                break;
            }
        if (!found)
            throw InputError("no first-level subdivision vertex at height " + to_string(h));
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return out;
}

VertexId find_vertex(const LevelGraph& g, const std::string& name) {
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (g.label(v) == name) return v;
    try {
        const unsigned long idx = std::stoul(name);
        if (idx < g.vertex_count()) return static_cast<VertexId>(idx);
    } catch (...) {
    }
    throw InputError("no vertex named '" + name + "' at the top level");
}

int run(int argc, char** argv) {
    CLI::App app{
        "l1weaver: admissible inverse systems of directed metric graphs, exact slice-measure "
        "diffusion, certified l1 embeddings, and Lipschitz-light factorization"};
    app.require_subcommand(1);

    // ---- build
    SystemOpts bsys;
    std::string build_out, build_dot;
    auto* cmd_build = app.add_subcommand("build", "construct a system and emit its document");
    add_system_flags(cmd_build, bsys);
    cmd_build->add_option("--out", build_out, "write the system document (JSON)");
    cmd_build->add_option("--dot", build_dot, "write the top level as Graphviz DOT");

    // ---- verify
    SystemOpts vsys;
    std::string verify_out, estimates = "all";
    int verify_level = -1, explicit_cap = 1;
    std::size_t sampler_draws = 0;
    std::uint64_t rng_seed = 20240801;
    auto* cmd_verify = app.add_subcommand("verify", "run the measure and metric checks");
    add_system_flags(cmd_verify, vsys);
    cmd_verify->add_option("--level", verify_level, "deepest level to check (default: depth)");
    cmd_verify->add_option("--estimates", estimates,
                           "all | comma list of: normalization,edge-bound,star-bound,"
                           "increment-bound,side-persistence,separation-persistence,"
                           "separation-lower-bound");
    cmd_verify->add_option("--explicit-cap", explicit_cap,
                           "deepest level for enumeration-based cross checks");
    cmd_verify->add_option("--sampler-draws", sampler_draws,
                           "also run the Monte Carlo consistency check with this many draws");
    cmd_verify->add_option("--seed", rng_seed, "RNG seed for the sampler check");
    cmd_verify->add_option("--out", verify_out, "write the verification report (JSON)");

    // ---- embed
    SystemOpts esys;
    std::string embed_out, embed_report;
    int embed_level_opt = -1;
    std::size_t support_limit = kDefaultSupportLimit;
    auto* cmd_embed = app.add_subcommand("embed", "emit exact l1 coordinates for a level");
    add_system_flags(cmd_embed, esys);
    cmd_embed->add_option("--level", embed_level_opt, "measure level (default: depth)");
    cmd_embed->add_option("--support-limit", support_limit, "explicit support guard");
    cmd_embed->add_option("--out", embed_out, "embedding CSV path");
    cmd_embed->add_option("--report", embed_report, "distortion report path (JSON)");

    // ---- factorize
    std::string pts_path, dist_path, u_path, fac_out, fac_maps, fac_report;
    int fac_base = 3, imin = 0, imax = 2;
    auto* cmd_fac = app.add_subcommand("factorize",
                                       "realize a finite metric space with a 1-Lipschitz map");
    cmd_fac->add_option("--points", pts_path, "points CSV (one id per line)")->required();
    cmd_fac->add_option("--dist", dist_path, "distance matrix CSV (exact rationals)")->required();
    cmd_fac->add_option("--u", u_path, "u values CSV (exact rationals)")->required();
    cmd_fac->add_option("--base", fac_base, "subdivision arity m");
    cmd_fac->add_option("--imin", imin, "coarsest level");
    cmd_fac->add_option("--imax", imax, "finest level");
    cmd_fac->add_option("--out", fac_out, "system document path (JSON)");
    cmd_fac->add_option("--maps", fac_maps, "point maps CSV path");
    cmd_fac->add_option("--report", fac_report, "verification report path (JSON)");

    // ---- metrics
    SystemOpts msys;
    std::string pair_text;
    bool want_cert = false, want_bracket = false;
    auto* cmd_metrics = app.add_subcommand("metrics", "query distances between two top vertices");
    add_system_flags(cmd_metrics, msys);
    cmd_metrics->add_option("--pair", pair_text, "two top-level vertex labels: 'a,b'")->required();
    cmd_metrics->add_flag("--certificate", want_cert, "print and re-verify the move certificate");
    cmd_metrics->add_flag("--bracket", want_bracket, "print the trimmed-star bracket");

    CLI11_PARSE(app, argc, argv);

    if (cmd_build->parsed()) {
        auto [sys, doc] = make_system(bsys);
        auto rep = validate_admissible(sys);
        if (!rep.admissible()) throw InputError("built system invalid: " + rep.summary());
        const std::string text = doc.dump(2) + "\n";
        if (!build_out.empty())
            write_file(build_out, text);
        else
            std::cout << text;
        if (!build_dot.empty()) write_file(build_dot, to_dot(sys.graph_at(sys.top_level())));
        std::cerr << "levels " << sys.levels.size() << ", top vertices "
                  << sys.graph_at(sys.top_level()).vertex_count() << ", admissible\n";
        return 0;
    }

    if (cmd_verify->parsed()) {
        auto [sys, doc] = make_system(vsys);
        const int L = verify_level < 0 ? sys.top_level() : verify_level;
        EstimateOptions opts;
        opts.up_to_level = L;
        opts.explicit_cap = explicit_cap;
        opts.seeds = resolve_seeds(sys, vsys.seeds);
        EstimateReport est = verify_estimates(sys, opts);

        bool enabled_pass = true;
        for (const auto& c : est.checks) {
            const bool enabled =
                estimates == "all" || estimates.find(c.name) != std::string::npos;
            if (enabled && !c.pass) enabled_pass = false;
        }
        auto lip = phi_lipschitz_light_check(sys, grid_intervals(sys, L), L);
        auto cmp = path_metric_comparison(sys, L);

        Json out;
        out["format"] = 1;
        out["type"] = "verify-report";
        out["estimates"] = estimate_report_json(est);
        out["lipschitz_light"] = {{"worst_ratio", rational_json(lip.worst_ratio)},
                                  {"bound", rational_json(lip.bound)},
                                  {"pass", lip.pass}};
        // The two-sided path-metric band assumes the openness and
        // fiber-connectivity conditions; when openness fails (legitimate for
        // factorized finite systems) the upper inequality is inapplicable and
        // only the unconditional side gates the exit code.
        out["path_comparison"] = {{"theta", cmp.theta},
                                  {"openness_ok", cmp.openness_ok},
                                  {"openness_violations", cmp.openness_violations},
                                  {"applicable", cmp.openness_ok},
                                  {"lower_ok", cmp.lower_ok},
                                  {"upper_ok", cmp.upper_ok},
                                  {"upper_bound", rational_json(cmp.upper_bound)},
                                  {"worst_upper", rational_json(cmp.worst_upper)}};
        bool pass = enabled_pass && lip.pass && cmp.lower_ok &&
                    (!cmp.openness_ok || cmp.upper_ok);
        if (sampler_draws > 0) {
            auto sam = sampler_consistency_check(sys, L, sampler_draws, rng_seed,
                                                 resolve_seeds(sys, vsys.seeds));
            out["sampler"] = {{"draws", sam.draws},
                              {"targets", sam.targets},
                              {"worst_sigma", sam.worst_sigma},
                              {"within_3_sigma", sam.within_3_sigma},
                              {"deterministic", sam.deterministic}};
            pass = pass && sam.within_3_sigma && sam.deterministic;
        }
        out["pass"] = pass;
        const std::string text = out.dump(2) + "\n";
        if (!verify_out.empty())
            write_file(verify_out, text);
        else
            std::cout << text;
        return pass ? 0 : 1;
    }

    if (cmd_embed->parsed()) {
        auto [sys, doc] = make_system(esys);
        const int L = embed_level_opt < 0 ? sys.top_level() : embed_level_opt;
        auto seeds = resolve_seeds(sys, esys.seeds);
        SliceMeasure mu = sigma_prime(sys, L, seeds, support_limit);
        const LevelGraph& g = sys.graph_at(L);
        std::vector<SubPoint> points;
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            if (sys.window.contains(g.height(v)) &&
                point_safe(sys, seeds, L, SubPoint::at_vertex(v)))
                points.push_back(SubPoint::at_vertex(v));
        auto vectors = embed_level(sys, mu, points);
        const std::string csv = embedding_csv(vectors);
        if (!embed_out.empty())
            write_file(embed_out, csv);
        else
            std::cout << csv;
        DistortionReport rep = distortion_report(sys, L, seeds);
        if (!embed_report.empty())
            write_file(embed_report, distortion_report_json(rep).dump(2) + "\n");
        std::cerr << "points " << points.size() << ", dimensions " << mu.support.size()
                  << ", min ratio " << to_string(rep.min_ratio) << "\n";
        return (rep.upper_ok && rep.lower_ok && rep.monotone_ok) ? 0 : 1;
    }

    if (cmd_fac->parsed()) {
        std::ifstream fp(pts_path), fd(dist_path), fu(u_path);
        if (!fp) throw InputError("cannot read " + pts_path);
        if (!fd) throw InputError("cannot read " + dist_path);
        if (!fu) throw InputError("cannot read " + u_path);
        FiniteMetricSpace x = load_metric_space(fp, fd, fu);
        Factorization fac = factorize(x, fac_base, imin, imax);
        FactorizationReport rep = verify_factorization(fac, x);
        fac.distortion = rep.lprime;
        if (!fac_out.empty()) write_file(fac_out, system_to_json(fac.system).dump(2) + "\n");
        if (!fac_maps.empty()) write_file(fac_maps, factorization_maps_csv(fac, x));
        const std::string text = factorization_report_json(rep).dump(2) + "\n";
        if (!fac_report.empty())
            write_file(fac_report, text);
        else
            std::cout << text;
        return (rep.compatible && rep.height_identity && rep.star_property && rep.finite) ? 0 : 1;
    }

    if (cmd_metrics->parsed()) {
        auto [sys, doc] = make_system(msys);
        const int top = sys.top_level();
        const LevelGraph& g = sys.graph_at(top);
        auto comma = pair_text.find(',');
        if (comma == std::string::npos) throw InputError("--pair expects 'label1,label2'");
        VertexId a = find_vertex(g, pair_text.substr(0, comma));
        VertexId b = find_vertex(g, pair_text.substr(comma + 1));
        const SubPoint pa = SubPoint::at_vertex(a), pb = SubPoint::at_vertex(b);
        DbarEngine engine(sys, top);
        auto pm = path_metric(g, pa, pb);
        std::cout << "path_metric  = " << (pm ? to_string(*pm) : "infinity") << "\n";
        std::cout << "dbar         = " << to_string(engine.distance(pa, pb)) << "\n";
        if (want_bracket && a != b) {
            auto br = trimmed_star_bracket(sys, top, pa, pb);
            std::cout << "bracket      = level " << br.level << ", (" << to_string(br.lower)
                      << ", " << to_string(br.upper) << "]\n";
        }
        if (want_cert) {
            auto cert = engine.certificate(pa, pb);
            std::string why;
            const bool ok = verify_star_chain(sys, top, pa, pb, cert, &why);
            std::cout << "certificate  = " << cert.moves.size() << " moves, total "
                      << to_string(cert.total) << (ok ? " (verified)" : " (BROKEN: " + why + ")")
                      << "\n";
            for (const auto& mv : cert.moves) {
                if (mv.is_star)
                    std::cout << "  star level " << mv.level << " vertex "
                              << sys.graph_at(mv.level).label(mv.vertex) << " cost "
                              << to_string(mv.cost) << "\n";
                else
                    std::cout << "  walk cost " << to_string(mv.cost) << "\n";
            }
            if (!ok) return 1;
        }
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
