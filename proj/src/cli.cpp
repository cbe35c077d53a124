#include "shapelab/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "shapelab/oracle.hpp"
#include "shapelab/parallel.hpp"

namespace shapelab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json point_json(Point p) { return json::array({p.x, p.y}); }

json grid_json(const Grid& g)
{
    return {{"origin", point_json(g.origin())}, {"extent", point_json(g.extent())}, {"nx", g.nx()}, {"ny", g.ny()},
            {"h", g.h()}};
}

json basis_json(const EigenBasis& b)
{
    json clusters = json::array();
    for (const auto& [first, count] : b.clusters()) clusters.push_back({{"first", first}, {"count", count}});
    return {{"lambdas", b.lambdas}, {"residuals", b.residuals}, {"iterations", b.iterations}, {"clusters", clusters}};
}

std::vector<fs::path> files_under(const fs::path& dir)
{
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir);
        if (rel == "manifest.json") continue;
        out.push_back(rel);
    }
    return out;
}

void copy_config(const fs::path& config, const fs::path& out)
{
    write_text(out / "config.json", read_text(config));
}

int cmd_eigen(const fs::path& config_path, const fs::path& out, int count)
{
    const RunConfig cfg = load_config(config_path);
    const Grid g = cfg.grid();
    const auto cf = make_coefficients(g, cfg.coefficients);
    const auto K = assemble_stiffness(g, cf);
    const auto M = assemble_mass(g, cf);
    const int n = count > 0 ? count : cfg.k;
    const auto basis = solve_lowest(K, M, n, cfg.eig_tol, cfg.seed);
    fs::create_directories(out / "fields");
    copy_config(config_path, out);
    write_field(eigen_field(g, basis), out / "fields" / "u.ssf");
    json report = {{"command", "eigen"}, {"grid", grid_json(g)}, {"basis", basis_json(basis)},
                   {"applied_defaults", cfg.applied_defaults}};
    write_report(report, out / "report.json");
    write_manifest(out, files_under(out));
    for (std::size_t i = 0; i < basis.size(); ++i) std::printf("lambda_%zu %.10g\n", i + 1, basis.lambdas[i]);
    return 0;
}

int cmd_optimize(const fs::path& config_path, const fs::path& out)
{
    const RunConfig cfg = load_config(config_path);
    const Grid g = cfg.grid();
    const auto cf = make_coefficients(g, cfg.coefficients);
    const ShapeState state = optimize(g, cf, cfg.optimizer_options());
    const ShapeProblem problem(g, cf, cfg.k, cfg.Lambda);
    auto components = threshold_components(state.phi, 0.5, cfg.k);
    attach_eigen_content(components, state.basis, problem.mass());
    const Field u = eigen_field(g, state.basis);

    fs::create_directories(out / "fields");
    copy_config(config_path, out);
    write_field(state.phi, out / "fields" / "phi.ssf");
    write_field(components.chi, out / "fields" / "chi.ssf");
    write_field(u, out / "fields" / "u.ssf");
    render_heatmap(state.phi, 0, out / "phi.pgm");

    json history = json::array();
    for (const auto& r : state.history) {
        history.push_back({{"iteration", r.iteration}, {"objective", r.objective}, {"eps", r.eps}});
    }
    json report = {{"command", "optimize"},
                   {"grid", grid_json(g)},
                   {"k", cfg.k},
                   {"Lambda", cfg.Lambda},
                   {"eps", state.eps},
                   {"objective", objective(problem, state, cfg.eig_tol)},
                   {"volume", problem.volume(state.phi)},
                   {"basis", basis_json(state.basis)},
                   {"next_lambda", state.next_lambda},
                   {"history", history},
                   {"components",
                    {{"count", components.count},
                     {"sizes", components.sizes},
                     {"eigen_content", components.eigen_content},
                     {"too_many_components", components.too_many_components},
                     {"interior_contact", components.interior_contact}}},
                   {"applied_defaults", cfg.applied_defaults}};
    try {
        const auto b = extract_boundary(state.phi);
        report["boundary"] = {{"points", b.size()}, {"length", b.length()}};
    } catch (const Error& e) {
        report["boundary"] = {{"error", e.what()}};
    }
    if (cfg.coefficients.kind == CoefficientKind::identity && cfg.k == 1 && cfg.Lambda > 0.0) {
        const auto ball = optimal_ball(cfg.Lambda);
        const double vol = std::numbers::pi * ball.R_star * ball.R_star;
        report["oracle"] = {{"R_star", ball.R_star},
                            {"J_star", ball.J_star},
                            {"volume_rel_error", (problem.volume(state.phi) - vol) / vol},
                            {"objective_rel_error", (report["objective"].get<double>() - ball.J_star) / ball.J_star}};
    }
    write_report(report, out / "report.json");
    write_manifest(out, files_under(out));
    std::fprintf(stderr, "objective %.10g, %d component(s)\n", report["objective"].get<double>(), components.count);
    return 0;
}

int cmd_diagnose(const fs::path& dir, int points, std::optional<Point> at, const std::optional<fs::path>& out)
{
    const RunData r = load_run(dir);
    const json rep = diagnose_run(r, points, at);
    const fs::path target = out.value_or(dir);
    fs::create_directories(target);
    write_report(rep, target / "diagnostics.json");
    write_manifest(target, files_under(target));
    return 0;
}

int cmd_audit(const fs::path& dir, int trials, std::uint64_t seed, const std::optional<fs::path>& out)
{
    const RunData r = load_run(dir);
    const json rep = audit_run(r, trials, seed);
    const fs::path target = out.value_or(dir);
    fs::create_directories(target);
    write_report(rep, target / "audit.json");
    write_manifest(target, files_under(target));
    return 0;
}

int cmd_oracle(const std::string& which, double lambda, double lx, double ly, int count)
{
    if (which == "disk") {
        if (!(lambda > 0.0)) throw Error(ErrorCode::BadParams, "--lambda must be positive for the disk case");
        const auto b = optimal_ball(lambda);
        std::printf("Lambda %.10g\nR_star %.10g\nJ_star %.10g\nj01 %.12g\n", b.Lambda, b.R_star, b.J_star,
                    bessel_j01());
        return 0;
    }
    const auto ev = which == "square" ? rectangle_eigenvalues(1.0, 1.0, count) : rectangle_eigenvalues(lx, ly, count);
    for (std::size_t i = 0; i < ev.size(); ++i) std::printf("lambda_%zu %.10g\n", i + 1, ev[i]);
    return 0;
}

int cmd_render(const fs::path& field, const fs::path& out, int comp)
{
    const auto [mx, my, nc] = read_field_header(field);
    if (mx < 2 || my < 2) throw Error(ErrorCode::IoError, "field too small to render");
    // Pixels only depend on the lattice shape, so unit cells stand in for the geometry.
    const Grid g(Point{0, 0}, Point{static_cast<double>(mx - 1), static_cast<double>(my - 1)},
                 static_cast<int>(mx - 1), static_cast<int>(my - 1));
    const Field f = read_field(field, g);
    if (comp < 0 || comp >= static_cast<int>(nc)) throw Error(ErrorCode::BadParams, "component out of range");
    const fs::path parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
    if (!parent.empty()) fs::create_directories(parent);
    render_heatmap(f, comp, out);
    write_manifest(parent, {out.filename()}, out.filename().string() + ".manifest.json");
    return 0;
}

} // namespace

RunData load_run(const fs::path& dir)
{
    RunData r;
    r.dir = dir;
    r.config = load_config(dir / "config.json");
    r.grid = r.config.grid();
    r.cf = make_coefficients(r.grid, r.config.coefficients);
    r.report = json::parse(read_text(dir / "report.json"));
    if (r.report.value("command", "") != "optimize") throw Error(ErrorCode::IoError, dir.string() + " is not an optimize run");
    r.state.phi = read_field(dir / "fields" / "phi.ssf", r.grid);
    r.u = read_field(dir / "fields" / "u.ssf", r.grid);
    r.state.eps = r.report.at("eps").get<double>();
    r.state.Lambda = r.config.Lambda;
    r.state.k = r.config.k;
    r.state.basis.lambdas = r.report.at("basis").at("lambdas").get<std::vector<double>>();
    for (int c = 0; c < r.u.ncomp(); ++c) r.state.basis.vectors.push_back(to_interior(r.grid, r.u.component(c)));
    r.state.basis.residuals.assign(r.state.basis.lambdas.size(), 0.0);
    if (r.report.at("next_lambda").is_number()) r.state.next_lambda = r.report.at("next_lambda").get<double>();
    r.components = threshold_components(r.state.phi, 0.5, r.config.k);
    attach_eigen_content(r.components, r.state.basis, assemble_mass(r.grid, r.cf));
    r.boundary = extract_boundary(r.state.phi);
    r.dist = distance_field(r.grid, r.boundary);
    return r;
}

json diagnose_run(const RunData& r, int points, std::optional<Point> at)
{
    const Grid& g = r.grid;
    const double h = g.h();
    const auto& dc = r.config.diagnostics;
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < r.boundary.size(); ++i) {
        if (r.boundary.inside_D[i]) inside.push_back(i);
    }
    if (inside.empty()) throw Error(ErrorCode::EmptyBoundary, "no free-boundary points inside D");

    std::vector<std::size_t> chosen;
    if (at) {
        std::size_t best = inside[0];
        for (std::size_t i : inside) {
            if ((r.boundary.points[i] - *at).norm() < (r.boundary.points[best] - *at).norm()) best = i;
        }
        chosen.push_back(best);
    } else {
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(points, 1)), inside.size());
        for (std::size_t m = 0; m < n; ++m) chosen.push_back(inside[m * inside.size() / n]);
    }

    const auto opt = optimality_residual(r.u, r.cf, r.config.Lambda, r.boundary, dc.d_in_h * h);
    const auto nd = nondegeneracy_audit(r.u, r.components, r.dist, r.boundary, r.cf);
    const Field& chi = r.components.chi;

    std::vector<json> reports(chosen.size());
    parallel_for(chosen.size(), [&](std::size_t m) {
        const std::size_t idx = chosen[m];
        const Point p = r.boundary.points[idx];
        json pr = {{"index", idx}, {"x0", point_json(p)}};
        try {
            const auto chart = make_chart(r.cf, p);
            pr["r_valid"] = chart.r_valid;
            const auto d = density_theta(chi, chart, theta_radii(h, chart.r_valid), dc.quad);
            pr["theta"] = d.theta;
            pr["theta_per_radius"] = d.per_radius;
            pr["classification"] = std::string(to_string(classify_point(d.theta, dc.delta_tol)));
            const double lo = dc.radii_min_h * h;
            const double hi = std::max(lo, dc.radii_max.value_or(std::min(0.5 * chart.r_valid, 32.0 * h)));
            const auto prof = weiss_monotonicity_audit(r.u, chi, chart, geometric_radii(lo, hi, dc.radii_count),
                                                       r.config.Lambda, r.cf.deltaA, dc.quad);
            pr["weiss"] = {{"radii", prof.radii},
                           {"W", prof.W},
                           {"fitted_C", prof.fitted_C},
                           {"max_backward_drop", prof.max_backward_drop}};
            pr["weiss_limit"] = prof.limit;
            std::vector<double> radii;
            for (double f : {16.0, 8.0, 4.0, 2.0}) {
                if (f * h <= chart.r_valid) radii.push_back(f * h);
            }
            const auto b = blowup_audit(r.u, chart, radii, dc.blowup_resolution);
            pr["blowup"] = {{"radii", b.radii}, {"homogeneity", b.homogeneity}, {"alignment", b.alignment}};
        } catch (const Error& e) {
            pr["error"] = e.what();
        }
        const auto pos = std::find(opt.points.begin(), opt.points.end(), idx) - opt.points.begin();
        pr["optimality_residual"] = opt.rho[static_cast<std::size_t>(pos)];
        if (r.u.ncomp() >= 2) {
            try {
                const auto a = harnack_quotient_audit(r.u, chi, p, dc.harnack_radius_h * h);
                pr["harnack"] = {{"samples", a.samples}, {"q_max", a.q_max}, {"alpha", a.alpha},
                                 {"seminorm", a.seminorm}, {"g", a.g}};
            } catch (const Error& e) {
                pr["harnack"] = {{"error", e.what()}};
            }
        }
        reports[m] = std::move(pr);
    });

    std::size_t regular = 0;
    std::size_t classified = 0;
    double dev = 0.0;
    for (const auto& pr : reports) {
        if (!pr.contains("theta")) continue;
        ++classified;
        regular += pr["classification"] == "regular" ? 1 : 0;
        dev += std::abs(pr["theta"].get<double>() - 0.5);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    json out = {
        {"command", "diagnose"},
        {"points", reports},
        {"summary",
         {{"points", reports.size()},
          {"regular_fraction", classified ? static_cast<double>(regular) / static_cast<double>(classified) : nan},
          {"mean_abs_theta_deviation", classified ? dev / static_cast<double>(classified) : nan},
          {"delta_tol", dc.delta_tol}}},
        {"optimality", {{"probed", opt.points.size()},
                        {"skipped", std::count(opt.skipped.begin(), opt.skipped.end(), true)},
                        {"median", opt.median},
                        {"q90", opt.q90},
                        {"max", opt.max},
                        {"d_in", dc.d_in_h * h}}},
        {"nondegeneracy", {{"c_lower", nd.c_lower},
                           {"c_lower_over_sqrt_Lambda", nd.c_lower / std::sqrt(r.config.Lambda)},
                           {"C1", nd.C1},
                           {"C1_components", nd.C1_components},
                           {"eta", nd.eta},
                           {"density_min", nd.density_min},
                           {"density_max", nd.density_max}}},
    };
    return out;
}

json audit_run(const RunData& r, int trials, std::uint64_t seed)
{
    const ShapeProblem problem(r.grid, r.cf, r.config.k, r.config.Lambda);
    const auto q = quasimin_audit(problem, r.state, trials, seed, r.config.eig_tol);
    json fam = json::object();
    for (const auto f : {CompetitorFamily::truncation, CompetitorFamily::harmonic, CompetitorFamily::flip}) {
        double worst = std::numeric_limits<double>::infinity();
        int n = 0;
        for (const auto& c : q.trials) {
            if (c.family != f) continue;
            ++n;
            if (std::isfinite(c.margin)) worst = std::min(worst, c.margin);
        }
        fam[std::string(to_string(f))] = {{"trials", n}, {"min_margin", worst}};
    }
    json margins = json::array();
    for (const auto& c : q.trials) {
        margins.push_back({{"family", std::string(to_string(c.family))}, {"margin", c.margin},
                           {"center", point_json(c.center)}, {"radius", c.radius}, {"t", c.t}});
    }

    // Level sets of |u_1|, whose zero set is the free boundary.
    double umax = 0.0;
    for (double v : r.u.component(0)) umax = std::max(umax, std::abs(v));
    const Field u1(r.grid, 1, std::vector<double>(r.u.component(0).begin(), r.u.component(0).end()));
    const Point lo = r.grid.origin();
    const Point hi = lo + r.grid.extent();
    json coarea = json::array();
    double t = 0.2 * umax;
    double perimeter = 0.0;
    for (int m = 0; m < 4; ++m, t *= 0.5) {
        const auto p = perimeter_estimate(u1, 0, t, lo, hi);
        if (m == 0) perimeter = p.perimeter;
        coarea.push_back({{"t", t}, {"P", p.coarea_average}, {"perimeter", p.perimeter}});
    }
    return {{"command", "audit"},
            {"seed", seed},
            {"quasimin", {{"reference", q.reference}, {"min_margin", q.min_margin}, {"families", fam},
                          {"trials", margins}}},
            {"perimeter", {{"u1_level_perimeter", perimeter}, {"chi_boundary_length", r.boundary.length()},
                           {"coarea", coarea}}},
            {"components", {{"count", r.components.count},
                            {"k", r.config.k},
                            {"too_many_components", r.components.too_many_components},
                            {"interior_contact", r.components.interior_contact},
                            {"eigen_content", r.components.eigen_content}}}};
}

int run(int argc, const char* const* argv)
{
    CLI::App app{"Spectral shape optimization laboratory"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

    auto* eigen = app.add_subcommand("eigen", "Lowest eigenpairs on the full box");
    std::string e_config;
    std::string e_out;
    int e_count = 0;
    eigen->add_option("--config", e_config)->required()->check(CLI::ExistingFile);
    eigen->add_option("--out", e_out)->required();
    eigen->add_option("--count", e_count, "Number of pairs (default k)")->check(CLI::PositiveNumber);

    auto* opt = app.add_subcommand("optimize", "Full optimization run");
    std::string o_config;
    std::string o_out;
    opt->add_option("--config", o_config)->required()->check(CLI::ExistingFile);
    opt->add_option("--out", o_out)->required();

    auto* diag = app.add_subcommand("diagnose", "Boundary-point reports for a run directory");
    std::string d_run;
    int d_points = -1;
    std::vector<double> d_point;
    std::string d_out;
    diag->add_option("--run", d_run)->required()->check(CLI::ExistingDirectory);
    auto* pts = diag->add_option("--points", d_points)->check(CLI::PositiveNumber);
    diag->add_option("--point", d_point)->delimiter(',')->expected(2)->excludes(pts);
    diag->add_option("--out", d_out);

    auto* audit = app.add_subcommand("audit", "Quasi-minimality and perimeter audits");
    std::string a_run;
    int a_trials = 200;
    std::uint64_t a_seed = 1;
    std::string a_out;
    audit->add_option("--run", a_run)->required()->check(CLI::ExistingDirectory);
    audit->add_option("--trials", a_trials)->check(CLI::Range(10, 100000));
    audit->add_option("--seed", a_seed);
    audit->add_option("--out", a_out);

    auto* orc = app.add_subcommand("oracle", "Closed-form reference values");
    std::string o_case;
    double o_lambda = 0.0;
    double o_lx = 1.0;
    double o_ly = 1.0;
    int o_count = 3;
    orc->add_option("--case", o_case)->required()->check(CLI::IsMember({"square", "rect", "disk"}));
    orc->add_option("--lambda", o_lambda);
    orc->add_option("--lx", o_lx)->check(CLI::PositiveNumber);
    orc->add_option("--ly", o_ly)->check(CLI::PositiveNumber);
    orc->add_option("--count", o_count)->check(CLI::PositiveNumber);

    auto* ren = app.add_subcommand("render", "PGM heatmap of a field");
    std::string r_field;
    std::string r_out;
    int r_comp = 0;
    ren->add_option("--field", r_field)->required()->check(CLI::ExistingFile);
    ren->add_option("--out", r_out)->required();
    ren->add_option("--component", r_comp)->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_worker_threads(threads);
    const auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
    try {
        if (*eigen) return cmd_eigen(e_config, e_out, e_count);
        if (*opt) return cmd_optimize(o_config, o_out);
        if (*diag) {
            std::optional<Point> at;
            if (!d_point.empty()) at = Point{d_point[0], d_point[1]};
            const int n = d_points > 0 ? d_points : load_config(fs::path(d_run) / "config.json").diagnostics.points;
            return cmd_diagnose(d_run, n, at, opt_path(d_out));
        }
        if (*audit) return cmd_audit(a_run, a_trials, a_seed, opt_path(a_out));
        if (*orc) {
            if (o_case == "disk" && !(o_lambda > 0.0)) {
                std::cerr << "oracle --case disk requires a positive --lambda\n";
                return 2;
            }
            return cmd_oracle(o_case, o_lambda, o_lx, o_ly, o_count);
        }
        if (*ren) return cmd_render(r_field, r_out, r_comp);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool config = e.code() == ErrorCode::SchemaError || e.code() == ErrorCode::ParseError;
        return config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace shapelab
