#include "shapelab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "shapelab/parallel.hpp"

namespace shapelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Rounding in the chart map may step just outside the closed box.
Point clamp_to_box(const Grid& g, Point p)
{
    const Point lo = g.origin();
    const Point hi = lo + g.extent();
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
}

void check_in_chart(const FrozenChart& chart, double r)
{
    if (!(r <= chart.r_valid * (1.0 + 1e-12))) throw Error(ErrorCode::OutOfChart, "radius exceeds the chart");
}

void check_quadrature(Quadrature q)
{
    if (q.n_r < 16 || q.n_theta < 64) throw Error(ErrorCode::QuadTooCoarse, "quadrature below (16, 64)");
}

double sample_at(const Field& f, int comp, Point p) { return bilinear_sample(f, comp, clamp_to_box(f.grid(), p)); }

// Sign making u_1 positive on the shape.
double orientation(const Field& u, const Field& chi)
{
    double s = 0.0;
    const auto u1 = u.component(0);
    const auto c = chi.component(0);
    for (std::size_t n = 0; n < u1.size(); ++n) {
        if (c[n] > 0.5) s += u1[n];
    }
    return s < 0.0 ? -1.0 : 1.0;
}

double quantile(std::vector<double> v, double q)
{
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    if (q == 0.5) {
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    }
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
}

// Nodes (i, j) with |x(i, j) - p| <= r.
template <typename F>
void for_nodes_in_ball(const Grid& g, Point p, double r, F&& f)
{
    const double h = g.h();
    const int i0 = std::max(0, static_cast<int>(std::floor((p.x - r - g.origin().x) / h)));
    const int i1 = std::min(g.nx(), static_cast<int>(std::ceil((p.x + r - g.origin().x) / h)));
    const int j0 = std::max(0, static_cast<int>(std::floor((p.y - r - g.origin().y) / h)));
    const int j1 = std::min(g.ny(), static_cast<int>(std::ceil((p.y + r - g.origin().y) / h)));
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            if ((g.coord(i, j) - p).norm() <= r) f(i, j);
        }
    }
}

} // namespace

FrozenChart make_chart(const CoefficientField& cf, Point x0)
{
    const Grid& g = cf.grid();
    if (!g.contains(x0)) throw Error(ErrorCode::OutOfDomain, "chart centre outside the box");
    FrozenChart c;
    c.x0 = x0;
    c.sqrtA = spd_sqrt(cf.matrix_at(x0));
    c.lamA = cf.lamA;
    c.r_valid = g.distance_to_boundary(x0) / cf.lamA;
    return c;
}

Field eigen_field(const Grid& grid, const EigenBasis& basis)
{
    const std::size_t nn = grid.node_count();
    std::vector<double> values(basis.size() * nn);
    for (std::size_t c = 0; c < basis.size(); ++c) {
        const auto nodal = to_nodal(grid, basis.vectors[c]);
        std::copy(nodal.begin(), nodal.end(), values.begin() + static_cast<std::ptrdiff_t>(c * nn));
    }
    return Field(grid, static_cast<int>(basis.size()), std::move(values));
}

std::vector<Field> component_gradients(const Field& u)
{
    std::vector<Field> out;
    out.reserve(static_cast<std::size_t>(u.ncomp()));
    for (int c = 0; c < u.ncomp(); ++c) out.push_back(central_gradient(u, c));
    return out;
}

std::vector<double> frozen_sample(const Field& u, const FrozenChart& chart, Point xi)
{
    check_in_chart(chart, xi.norm());
    return bilinear_sample(u, clamp_to_box(u.grid(), chart.map(xi)));
}

std::vector<Point> frozen_gradient(const std::vector<Field>& grads, const FrozenChart& chart, Point xi)
{
    check_in_chart(chart, xi.norm());
    std::vector<Point> out;
    out.reserve(grads.size());
    for (const auto& gf : grads) {
        const Point x = chart.map(xi);
        const double gx = sample_at(gf, 0, x);
        const double gy = sample_at(gf, 1, x);
        const Sym2& s = chart.sqrtA;
        out.push_back({s.a11 * gx + s.a12 * gy, s.a12 * gx + s.a22 * gy});
    }
    return out;
}

double weiss(const Field& u, const Field& chi, const FrozenChart& chart, double r, double Lambda, Quadrature quad)
{
    return weiss(u, component_gradients(u), chi, chart, r, Lambda, quad);
}

double weiss(const Field& u, const std::vector<Field>& grads, const Field& chi, const FrozenChart& chart, double r,
             double Lambda, Quadrature quad)
{
    check_quadrature(quad);
    if (!(r > 0.0)) throw Error(ErrorCode::BadParams, "radius must be positive");
    check_in_chart(chart, r);
    const double dr = r / quad.n_r;
    const double dt = 2.0 * std::numbers::pi / quad.n_theta;
    const Sym2& s = chart.sqrtA;
    double volume = 0.0;
    for (int a = 0; a < quad.n_r; ++a) {
        const double rho = (a + 0.5) * dr;
        for (int b = 0; b < quad.n_theta; ++b) {
            const double t = (b + 0.5) * dt;
            const Point x = chart.map({rho * std::cos(t), rho * std::sin(t)});
            double e = 0.0;
            for (const auto& gf : grads) {
                const double gx = sample_at(gf, 0, x);
                const double gy = sample_at(gf, 1, x);
                const double fx = s.a11 * gx + s.a12 * gy;
                const double fy = s.a12 * gx + s.a22 * gy;
                e += fx * fx + fy * fy;
            }
            if (sample_at(chi, 0, x) > 0.5) e += Lambda;
            volume += e * rho;
        }
    }
    volume *= dr * dt;
    double boundary = 0.0;
    for (int b = 0; b < quad.n_theta; ++b) {
        const double t = b * dt;
        const Point x = chart.map({r * std::cos(t), r * std::sin(t)});
        for (int c = 0; c < u.ncomp(); ++c) {
            const double v = sample_at(u, c, x);
            boundary += v * v;
        }
    }
    boundary *= r * dt;
    return volume / (r * r) - boundary / (r * r * r);
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.empty()) throw Error(ErrorCode::DimensionMismatch, "fit samples");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return {my, 0.0};
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

WeissProfile fit_weiss_profile(std::vector<double> radii, std::vector<double> W, double deltaA)
{
    if (radii.size() != W.size() || radii.empty()) throw Error(ErrorCode::DimensionMismatch, "profile samples");
    if (!(deltaA > 0.0)) throw Error(ErrorCode::BadParams, "deltaA must be positive");
    WeissProfile p;
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
        if (!(radii[i + 1] > radii[i])) throw Error(ErrorCode::BadParams, "radii must increase");
        const double drop = W[i] - W[i + 1];
        p.max_backward_drop = std::max(p.max_backward_drop, drop);
        p.fitted_C = std::max(p.fitted_C, drop / (std::pow(radii[i + 1], deltaA) - std::pow(radii[i], deltaA)));
    }
    p.limit = linear_fit(radii, W).first;
    p.radii = std::move(radii);
    p.W = std::move(W);
    return p;
}

WeissProfile weiss_monotonicity_audit(const Field& u, const Field& chi, const FrozenChart& chart,
                                      const std::vector<double>& radii, double Lambda, double deltaA,
                                      Quadrature quad)
{
    if (radii.empty()) throw Error(ErrorCode::BadParams, "no radii");
    if (radii.front() < 2.0 * u.grid().h() * (1.0 - 1e-9)) throw Error(ErrorCode::BadParams, "radius below 2h");
    const auto grads = component_gradients(u);
    std::vector<double> W(radii.size());
    parallel_for(radii.size(), [&](std::size_t i) { W[i] = weiss(u, grads, chi, chart, radii[i], Lambda, quad); });
    auto p = fit_weiss_profile(radii, std::move(W), deltaA);
    p.x0 = chart.x0;
    return p;
}

std::vector<double> geometric_radii(double lo, double hi, int n)
{
    if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw Error(ErrorCode::BadParams, "radii range");
    if (n == 1) return {lo};
    std::vector<double> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    r.back() = hi;
    return r;
}

std::vector<double> theta_radii(double h, double r_valid, int n)
{
    const double lo = 2.0 * h;
    const double hi = std::max(lo, std::min(0.25 * r_valid, 16.0 * h));
    if (n < 2 || hi == lo) return {lo};
    std::vector<double> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return r;
}

DensityEstimate density_theta(const Field& chi, const FrozenChart& chart, const std::vector<double>& radii,
                              Quadrature quad)
{
    check_quadrature(quad);
    if (radii.empty()) throw Error(ErrorCode::BadParams, "no radii");
    DensityEstimate d;
    const double dt = 2.0 * std::numbers::pi / quad.n_theta;
    for (double r : radii) {
        check_in_chart(chart, r);
        const double dr = r / quad.n_r;
        double inside = 0.0;
        for (int a = 0; a < quad.n_r; ++a) {
            const double rho = (a + 0.5) * dr;
            for (int b = 0; b < quad.n_theta; ++b) {
                const double t = (b + 0.5) * dt;
                if (sample_at(chi, 0, chart.map({rho * std::cos(t), rho * std::sin(t)})) > 0.5) inside += rho;
            }
        }
        d.per_radius.push_back(inside * dr * dt / (std::numbers::pi * r * r));
    }
    d.theta = std::clamp(linear_fit(radii, d.per_radius).first, 0.0, 1.0);
    return d;
}

std::string_view to_string(PointClass c) { return c == PointClass::regular ? "regular" : "singular"; }

PointClass classify_point(double theta, double delta_tol)
{
    return std::abs(theta - 0.5) <= delta_tol ? PointClass::regular : PointClass::singular;
}

BlowupAudit blowup_audit(const Field& u, const FrozenChart& chart, const std::vector<double>& radii, int resolution)
{
    if (radii.empty()) throw Error(ErrorCode::BadParams, "no radii");
    if (resolution < 5) throw Error(ErrorCode::BadParams, "reference resolution below 5");
    const double h = u.grid().h();
    for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
        if (!(radii[i] > radii[i + 1])) throw Error(ErrorCode::BadParams, "blow-up radii must decrease");
    }
    if (radii.back() < 2.0 * h * (1.0 - 1e-9)) throw Error(ErrorCode::BadParams, "radius below 2h");
    for (double r : radii) check_in_chart(chart, r);

    BlowupAudit out;
    out.radii = radii;
    for (int b = 0; b < resolution; ++b) {
        for (int a = 0; a < resolution; ++a) {
            const Point xi{-1.0 + 2.0 * a / (resolution - 1), -1.0 + 2.0 * b / (resolution - 1)};
            if (xi.norm() <= 1.0 + 1e-12) out.reference.push_back(xi);
        }
    }
    const int k = u.ncomp();
    const auto sample = [&](Point x, int c) { return sample_at(u, c, chart.map(x)); };
    // xi . grad B(xi) as the radial derivative d/dt B(t xi) at t = 1, by a
    // centred difference; it reproduces B exactly for one-homogeneous samples.
    constexpr double tau = 1e-2;
    for (double r : radii) {
        std::vector<std::vector<double>> fieldr(out.reference.size(), std::vector<double>(static_cast<std::size_t>(k)));
        double num = 0.0;
        double den = 0.0;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t s = 0; s < out.reference.size(); ++s) {
            const Point xi = out.reference[s];
            const double len = xi.norm();
            const double t_hi = len > 0.0 ? std::min(1.0 + tau, chart.r_valid / (r * len)) : 1.0 + tau;
            const double t_lo = 1.0 - tau;
            const bool annulus = len >= 0.25 - 1e-12;
            for (int c = 0; c < k; ++c) {
                const double v = sample(xi * r, c) / r;
                fieldr[s][static_cast<std::size_t>(c)] = v;
                if (annulus) {
                    const double dv = (sample(xi * (r * t_hi), c) - sample(xi * (r * t_lo), c)) / (r * (t_hi - t_lo));
                    num += (dv - v) * (dv - v);
                    den += v * v;
                }
            }
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b) gram(a, b) += fieldr[s][static_cast<std::size_t>(a)] * fieldr[s][static_cast<std::size_t>(b)];
            }
        }
        if (std::sqrt(den) < 1e-12 || std::sqrt(gram.trace()) < 1e-12) {
            throw Error(ErrorCode::DegenerateField, "rescaled field vanishes");
        }
        out.homogeneity.push_back(num / den);
        if (k == 1) {
            out.alignment.push_back(0.0);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
            out.alignment.push_back(std::max(0.0, 1.0 - es.eigenvalues().maxCoeff() / gram.trace()));
        }
        out.rescaled.push_back(std::move(fieldr));
    }
    return out;
}

OptimalityResidual optimality_residual(const Field& u, const CoefficientField& cf, double Lambda,
                                       const BoundaryPolyline& boundary, double d_in)
{
    const Grid& g = u.grid();
    const double h = g.h();
    if (!(d_in >= h * (1.0 - 1e-9) && d_in <= 4.0 * h * (1.0 + 1e-9))) {
        throw Error(ErrorCode::BadParams, "d_in outside [h, 4h]");
    }
    if (!(Lambda > 0.0)) throw Error(ErrorCode::BadParams, "Lambda must be positive");
    OptimalityResidual out;
    for (std::size_t i = 0; i < boundary.size(); ++i) {
        if (boundary.inside_D[i]) out.points.push_back(i);
    }
    if (out.points.empty()) throw Error(ErrorCode::EmptyBoundary, "no free-boundary points inside D");
    const Field grad = central_gradient(u, 0);
    const double sl = std::sqrt(Lambda);
    out.rho.assign(out.points.size(), kNaN);
    out.skipped.assign(out.points.size(), false);
    for (std::size_t m = 0; m < out.points.size(); ++m) {
        const std::size_t i = out.points[m];
        const Point q = boundary.points[i] - boundary.normals[i] * d_in;
        if (!g.contains(q)) {
            out.skipped[m] = true;
            continue;
        }
        const auto vals = bilinear_sample(u, q);
        if (std::abs(vals[0]) < 1e-12) {
            out.skipped[m] = true;
            continue;
        }
        double sum = 1.0;
        for (std::size_t c = 1; c < vals.size(); ++c) sum += (vals[c] / vals[0]) * (vals[c] / vals[0]);
        const double gfac = 1.0 / std::sqrt(sum);
        const double gx = bilinear_sample(grad, 0, q);
        const double gy = bilinear_sample(grad, 1, q);
        const Sym2 s = spd_sqrt(cf.matrix_at(q));
        const double norm = std::hypot(s.a11 * gx + s.a12 * gy, s.a12 * gx + s.a22 * gy);
        out.rho[m] = std::abs(norm - gfac * sl) / sl;
    }
    std::vector<double> kept;
    for (std::size_t m = 0; m < out.rho.size(); ++m) {
        if (!out.skipped[m]) kept.push_back(out.rho[m]);
    }
    out.median = quantile(kept, 0.5);
    out.q90 = quantile(kept, 0.9);
    out.max = kept.empty() ? kNaN : *std::max_element(kept.begin(), kept.end());
    return out;
}

NondegeneracyReport nondegeneracy_audit(const Field& u, const ComponentMap& components, const Field& dist,
                                        const BoundaryPolyline& boundary, const CoefficientField& cf)
{
    if (components.count == 0) throw Error(ErrorCode::EmptyShape, "no component");
    const Grid& g = u.grid();
    const double h = g.h();
    const Field& chi = components.chi;
    const double sign = orientation(u, chi);
    const int k = u.ncomp();
    const auto c = chi.component(0);
    const auto d = dist.component(0);
    const auto u1 = u.component(0);

    NondegeneracyReport rep;
    double umax = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (c[n] > 0.5) umax = std::max(umax, sign * u1[n]);
    }
    // C1 only looks at components carrying u_1; elsewhere u_1 is penalization leakage.
    std::vector<double> share(static_cast<std::size_t>(components.count), 0.0);
    double total = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        const int l = components.labels.empty() ? 0 : components.labels[n];
        if (c[n] <= 0.5 || l < 0) continue;
        share[static_cast<std::size_t>(l)] += u1[n] * u1[n];
        total += u1[n] * u1[n];
    }
    rep.c_lower = std::numeric_limits<double>::infinity();
    rep.C1 = 0.0;
    rep.C1_components.assign(static_cast<std::size_t>(k), 0.0);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (c[n] <= 0.5) continue;
        const double v1 = sign * u1[n];
        if (d[n] >= 2.0 * h * (1.0 - 1e-9) && d[n] <= 8.0 * h * (1.0 + 1e-9)) {
            rep.c_lower = std::min(rep.c_lower, v1 / d[n]);
        }
        const int l = components.labels.empty() ? 0 : components.labels[n];
        const bool carries = l >= 0 && share[static_cast<std::size_t>(l)] >= 1e-3 * total;
        if (carries && v1 > 1e-12 * umax && v1 > 0.0) {
            double norm2 = 0.0;
            for (int i = 0; i < k; ++i) {
                const double ui = u.component(i)[n];
                norm2 += ui * ui;
                rep.C1_components[static_cast<std::size_t>(i)] =
                    std::max(rep.C1_components[static_cast<std::size_t>(i)], std::abs(ui) / v1);
            }
            rep.C1 = std::max(rep.C1, std::sqrt(norm2) / v1);
        }
    }
    if (std::isinf(rep.c_lower)) rep.c_lower = kNaN;

    rep.eta = std::numeric_limits<double>::infinity();
    rep.density_min = std::numeric_limits<double>::infinity();
    rep.density_max = -std::numeric_limits<double>::infinity();
    const double dt = 2.0 * std::numbers::pi / 128;
    bool any = false;
    for (std::size_t i = 0; i < boundary.size(); ++i) {
        if (!boundary.inside_D[i]) continue;
        any = true;
        const Point p = boundary.points[i];
        for (double r : {4.0 * h, 8.0 * h, 16.0 * h}) {
            double sup = 0.0;
            for_nodes_in_ball(g, p, cf.lamA * r, [&](int a, int b) {
                double n2 = 0.0;
                for (int comp = 0; comp < k; ++comp) n2 += u.at(comp, a, b) * u.at(comp, a, b);
                sup = std::max(sup, std::sqrt(n2));
            });
            rep.eta = std::min(rep.eta, sup / r);
        }
        const double r = 8.0 * h;
        const double dr = r / 32;
        double inside = 0.0;
        for (int a = 0; a < 32; ++a) {
            const double rho = (a + 0.5) * dr;
            for (int b = 0; b < 128; ++b) {
                const double t = (b + 0.5) * dt;
                const Point x{p.x + rho * std::cos(t), p.y + rho * std::sin(t)};
                if (g.contains(x) && bilinear_sample(chi, 0, x) > 0.5) inside += rho;
            }
        }
        const double frac = inside * dr * dt / (std::numbers::pi * r * r);
        rep.density_min = std::min(rep.density_min, frac);
        rep.density_max = std::max(rep.density_max, frac);
    }
    if (!any) {
        rep.eta = kNaN;
        rep.density_min = kNaN;
        rep.density_max = kNaN;
    }
    return rep;
}

PerimeterEstimate perimeter_estimate(const Field& field, int comp, double t, Point lo, Point hi)
{
    if (!(t > 0.0)) throw Error(ErrorCode::BadParams, "level range must be positive");
    if (comp < 0 || comp >= field.ncomp()) throw Error(ErrorCode::BadParams, "component out of range");
    const auto src = field.component(comp);
    std::vector<double> mag(src.size());
    for (std::size_t n = 0; n < src.size(); ++n) mag[n] = std::abs(src[n]);
    const Field absf(field.grid(), 1, std::move(mag));
    PerimeterEstimate p;
    for (int m = 1; m <= 16; ++m) {
        const double s = t * m / 16.0;
        p.levels.push_back(s);
        p.perimeters.push_back(clipped_length(level_set_segments(absf, 0, s), lo, hi));
    }
    p.perimeter = p.perimeters.front();
    double sum = 0.0;
    for (double v : p.perimeters) sum += v;
    p.coarea_average = sum / 16.0;
    return p;
}

std::string_view to_string(CompetitorFamily f)
{
    switch (f) {
    case CompetitorFamily::truncation: return "truncation";
    case CompetitorFamily::harmonic: return "harmonic";
    case CompetitorFamily::flip: return "flip";
    }
    return "unknown";
}

namespace {

Field threshold(const Field& phi)
{
    Field chi(phi.grid(), 1);
    const Grid& g = phi.grid();
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) chi.at(0, i, j) = phi.at(0, i, j) > 0.5 ? 1.0 : 0.0;
    }
    return chi;
}

// Sum of the Rayleigh-Ritz values of span(vs) for (K, M); NaN if the system is degenerate.
double ritz_sum(const SparseOperator& K, const SparseOperator& M, const std::vector<std::vector<double>>& vs)
{
    const auto k = static_cast<Eigen::Index>(vs.size());
    std::vector<std::vector<double>> kv;
    std::vector<std::vector<double>> mv;
    for (const auto& v : vs) {
        kv.push_back(K.apply(v));
        mv.push_back(M.apply(v));
    }
    Eigen::MatrixXd G(k, k);
    Eigen::MatrixXd B(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            double g = 0.0;
            double m = 0.0;
            const auto& va = vs[static_cast<std::size_t>(a)];
            for (std::size_t n = 0; n < va.size(); ++n) {
                g += va[n] * kv[static_cast<std::size_t>(b)][n];
                m += va[n] * mv[static_cast<std::size_t>(b)][n];
            }
            G(a, b) = g;
            B(a, b) = m;
        }
    }
    G = 0.5 * (G + G.transpose()).eval();
    B = 0.5 * (B + B.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) return kNaN;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(G, B, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return kNaN;
    return es.eigenvalues().sum();
}

// h^2 #{interior nodes with chi = 1 and U != 0}.
double positivity_volume(const Grid& g, const Field& chi, const std::vector<std::vector<double>>& vs)
{
    std::size_t count = 0;
    for (std::size_t m = 0; m < g.interior_count(); ++m) {
        if (chi.component(0)[g.node_of_interior(m)] <= 0.5) continue;
        bool nonzero = false;
        for (const auto& v : vs) nonzero = nonzero || v[m] != 0.0;
        if (nonzero) ++count;
    }
    return g.h() * g.h() * static_cast<double>(count);
}

double competitor_margin(const ShapeProblem& problem, const QuasiminAudit& ref,
                         const std::vector<std::vector<double>>& vs)
{
    const double lam = ritz_sum(ref.K, problem.mass(), vs);
    const double j = lam + problem.Lambda() * positivity_volume(problem.grid(), ref.base.phi, vs);
    return (j - ref.reference) / ref.reference;
}

} // namespace

QuasiminAudit quasimin_reference(const ShapeProblem& problem, const ShapeState& state, double eig_tol)
{
    QuasiminAudit a;
    a.base = problem.evaluate(threshold(state.phi), state.eps, eig_tol, 1, &state.basis);
    a.K = problem.stiffness(a.base.phi, a.base.eps);
    double lam = 0.0;
    for (int i = 0; i < problem.k(); ++i) lam += a.base.basis.lambdas[static_cast<std::size_t>(i)];
    const std::vector<std::vector<double>> vs(a.base.basis.vectors.begin(),
                                              a.base.basis.vectors.begin() + problem.k());
    a.reference = lam + problem.Lambda() * positivity_volume(problem.grid(), a.base.phi, vs);
    return a;
}

Competitor truncation_competitor(const ShapeProblem& problem, const QuasiminAudit& ref, Point center,
                                 double radius, double t)
{
    const Grid& g = problem.grid();
    std::vector<std::vector<double>> vs(ref.base.basis.vectors.begin(),
                                        ref.base.basis.vectors.begin() + problem.k());
    for (std::size_t m = 0; m < g.interior_count(); ++m) {
        const double r = (g.coord(g.node_of_interior(m)) - center).norm();
        const double eta = std::clamp(2.0 - r / radius, 0.0, 1.0);
        if (eta == 0.0) continue;
        for (auto& v : vs) {
            const double soft = std::copysign(std::max(std::abs(v[m]) - t, 0.0), v[m]);
            v[m] = eta * soft + (1.0 - eta) * v[m];
        }
    }
    Competitor c{CompetitorFamily::truncation, competitor_margin(problem, ref, vs), center, radius, t};
    return c;
}

Competitor harmonic_competitor(const ShapeProblem& problem, const QuasiminAudit& ref, Point center, double radius)
{
    const Grid& g = problem.grid();
    const std::size_t n = g.interior_count();
    std::vector<std::vector<double>> vs(ref.base.basis.vectors.begin(),
                                        ref.base.basis.vectors.begin() + problem.k());
    std::vector<bool> ball(n, false);
    std::vector<std::size_t> free;
    for (std::size_t m = 0; m < n; ++m) {
        if ((g.coord(g.node_of_interior(m)) - center).norm() <= radius) {
            ball[m] = true;
            free.push_back(m);
        }
    }
    Competitor c{CompetitorFamily::harmonic, 0.0, center, radius, 0.0};
    if (free.empty()) return c;
    auto& u1 = vs[0];
    double sign = 0.0;
    for (double v : u1) sign += v;
    sign = sign < 0.0 ? -1.0 : 1.0;
    // Trace data: u1 off the ball, zero on it.
    const SparseOperator& K0 = problem.base_stiffness();
    std::vector<double> trace(n);
    for (std::size_t m = 0; m < n; ++m) trace[m] = ball[m] ? 0.0 : sign * u1[m];
    const auto kt = K0.apply(trace);
    std::vector<double> rhs(free.size());
    for (std::size_t f = 0; f < free.size(); ++f) rhs[f] = -kt[free[f]];
    std::vector<double> hx(free.size());
    SparseCholesky(K0.restrict_to(ball)).solve(rhs, hx);
    for (std::size_t f = 0; f < free.size(); ++f) {
        const std::size_t m = free[f];
        u1[m] = sign * std::min(sign * u1[m], hx[f]);
    }
    c.margin = competitor_margin(problem, ref, vs);
    return c;
}

Competitor flip_competitor(const ShapeProblem& problem, const QuasiminAudit& ref,
                           const std::vector<std::size_t>& nodes, double eig_tol)
{
    const Grid& g = problem.grid();
    Field chi = ref.base.phi;
    auto v = chi.component(0);
    for (std::size_t n : nodes) {
        const int i = static_cast<int>(n % static_cast<std::size_t>(g.nodes_x()));
        const int j = static_cast<int>(n / static_cast<std::size_t>(g.nodes_x()));
        if (g.on_boundary(i, j)) throw Error(ErrorCode::BadParams, "flip on the box boundary");
        v[n] = 1.0 - v[n];
    }
    const ShapeState s = problem.evaluate(chi, ref.base.eps, eig_tol, 1, &ref.base.basis);
    double lam = 0.0;
    for (int i = 0; i < problem.k(); ++i) lam += s.basis.lambdas[static_cast<std::size_t>(i)];
    const double j = lam + problem.Lambda() * problem.volume(s.phi);
    Competitor c{CompetitorFamily::flip, (j - ref.reference) / ref.reference, g.coord(nodes.empty() ? 0 : nodes[0]),
                 0.0, 0.0};
    return c;
}

QuasiminAudit quasimin_audit(const ShapeProblem& problem, const ShapeState& state, int trials, std::uint64_t seed,
                             double eig_tol)
{
    if (trials < 10) throw Error(ErrorCode::BadParams, "at least 10 trials");
    QuasiminAudit a = quasimin_reference(problem, state, eig_tol);
    const Grid& g = problem.grid();
    const double h = g.h();
    const auto chi = a.base.phi.component(0);

    // Interior nodes whose 4-neighbourhood meets both phases.
    std::vector<std::size_t> interface;
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            const double c = chi[g.node(i, j)];
            const bool mixed = chi[g.node(i - 1, j)] != c || chi[g.node(i + 1, j)] != c || chi[g.node(i, j - 1)] != c
                || chi[g.node(i, j + 1)] != c;
            if (mixed) interface.push_back(g.node(i, j));
        }
    }
    if (interface.empty()) throw Error(ErrorCode::EmptyBoundary, "thresholded state has no interface");
    double umax = 0.0;
    for (const auto& v : a.base.basis.vectors) {
        for (double x : v) umax = std::max(umax, std::abs(x));
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, interface.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    a.min_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Competitor c{};
        const Point centre = g.coord(interface[pick(rng)]);
        const double radius = h * (2.0 + 4.0 * unit(rng));
        switch (t % 3) {
        case 0: {
            const double level = 0.1 * umax * (1.0 - unit(rng)); // (0, 0.1 |U|_inf]
            c = truncation_competitor(problem, a, centre, radius, level);
            break;
        }
        case 1: c = harmonic_competitor(problem, a, centre, radius); break;
        default: {
            const int count = 1 + static_cast<int>(unit(rng) * 5.0);
            std::vector<std::size_t> nodes;
            while (static_cast<int>(nodes.size()) < std::min<int>(count, static_cast<int>(interface.size()))) {
                const std::size_t n = interface[pick(rng)];
                if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
            }
            c = flip_competitor(problem, a, nodes, eig_tol);
            break;
        }
        }
        if (std::isfinite(c.margin)) a.min_margin = std::min(a.min_margin, c.margin);
        a.trials.push_back(c);
    }
    return a;
}

HarnackAudit harnack_quotient_audit(const Field& u, const Field& chi, Point p, double r)
{
    if (u.ncomp() < 2) throw Error(ErrorCode::BadParams, "quotient audit needs k >= 2");
    const Grid& g = u.grid();
    const double sign = orientation(u, chi);
    const int k = u.ncomp();
    std::vector<Point> xs;
    std::vector<std::vector<double>> qs;
    for_nodes_in_ball(g, p, r, [&](int i, int j) {
        if (chi.at(0, i, j) <= 0.5) return;
        const double u1 = u.at(0, i, j);
        if (sign * u1 <= 1e-12) return;
        xs.push_back(g.coord(i, j));
        std::vector<double> q;
        for (int c = 1; c < k; ++c) q.push_back(u.at(c, i, j) / u1);
        qs.push_back(std::move(q));
    });
    if (xs.size() < 30) throw Error(ErrorCode::TooFewSamples, "fewer than 30 admissible nodes");

    HarnackAudit a;
    a.samples = xs.size();
    a.q_max.assign(static_cast<std::size_t>(k - 1), 0.0);
    double qscale = 0.0;
    for (const auto& q : qs) {
        for (std::size_t c = 0; c < q.size(); ++c) {
            a.q_max[c] = std::max(a.q_max[c], std::abs(q[c]));
            qscale = std::max(qscale, std::abs(q[c]));
        }
    }
    std::vector<double> lx;
    std::vector<double> ly;
    std::vector<std::pair<double, double>> pairs; // (|dx|, |dq|)
    for (std::size_t s = 0; s < xs.size(); ++s) {
        for (std::size_t t = s + 1; t < xs.size(); ++t) {
            double dq2 = 0.0;
            for (std::size_t c = 0; c < qs[s].size(); ++c) dq2 += (qs[s][c] - qs[t][c]) * (qs[s][c] - qs[t][c]);
            const double dq = std::sqrt(dq2);
            if (dq <= 1e-12 * (1.0 + qscale)) continue;
            const double dx = (xs[s] - xs[t]).norm();
            pairs.emplace_back(dx, dq);
            lx.push_back(std::log(dx));
            ly.push_back(std::log(dq));
        }
    }
    if (pairs.empty()) {
        a.alpha = 1.0;
        a.seminorm = 0.0;
    } else {
        a.alpha = std::clamp(linear_fit(lx, ly).second, 1e-3, 1.0);
        for (const auto& [dx, dq] : pairs) a.seminorm = std::max(a.seminorm, dq / std::pow(dx, a.alpha));
    }
    std::size_t nearest = 0;
    for (std::size_t s = 1; s < xs.size(); ++s) {
        if ((xs[s] - p).norm() < (xs[nearest] - p).norm()) nearest = s;
    }
    double sum = 1.0;
    for (double q : qs[nearest]) sum += q * q;
    a.g = 1.0 / std::sqrt(sum);
    return a;
}

} // namespace shapelab
