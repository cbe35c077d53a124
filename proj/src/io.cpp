#include "shapelab/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace shapelab {

using nlohmann::json;

namespace {

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void schema(const std::string& path, const std::string& what)
{
    throw Error(ErrorCode::SchemaError, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Typed access to one JSON object with strict key checking and default tracking.
class Section {
public:
    Section(const json& j, std::string path, std::vector<std::string>& defaults)
        : j_(j), path_(std::move(path)), defaults_(defaults)
    {
        if (!j_.is_object()) schema(path_.empty() ? "<root>" : path_, "expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const
    {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [key, value] : j_.items()) {
            if (!ok.count(key)) schema(join(path_, key), "unknown key '" + key + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string path(const char* key) const { return join(path_, key); }
    const json& at(const char* key) const
    {
        if (!j_.contains(key)) schema(path(key), "missing required key");
        return j_.at(key);
    }

    double number(const char* key) const
    {
        const json& v = at(key);
        if (!v.is_number()) schema(path(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) schema(path(key), "expected a finite number");
        return d;
    }

    double number(const char* key, double fallback) const
    {
        if (has(key)) return number(key);
        defaults_.push_back(path(key) + "=" + format_number(fallback));
        return fallback;
    }

    std::int64_t integer(const char* key) const
    {
        const json& v = at(key);
        if (!v.is_number_integer()) schema(path(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::int64_t integer(const char* key, std::int64_t fallback) const
    {
        if (has(key)) return integer(key);
        defaults_.push_back(path(key) + "=" + std::to_string(fallback));
        return fallback;
    }

    std::string string(const char* key) const
    {
        const json& v = at(key);
        if (!v.is_string()) schema(path(key), "expected a string");
        return v.get<std::string>();
    }

    Point point(const char* key) const
    {
        const json& v = at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            schema(path(key), "expected an array of two numbers");
        }
        return {v[0].get<double>(), v[1].get<double>()};
    }

    Point point(const char* key, Point fallback) const
    {
        if (has(key)) return point(key);
        defaults_.push_back(path(key) + "=[" + format_number(fallback.x) + "," + format_number(fallback.y) + "]");
        return fallback;
    }

    Section child(const char* key) const { return Section(at(key), path(key), defaults_); }

    void note_default(const char* key, const std::string& value) const { defaults_.push_back(path(key) + "=" + value); }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& defaults_;
};

void require(bool ok, const std::string& path, const std::string& what)
{
    if (!ok) schema(path, what);
}

CoefficientSpec parse_coefficients(const Section& s)
{
    CoefficientSpec spec;
    const std::string kind = s.string("kind");
    if (kind == "identity") {
        s.allow({"kind"});
        spec.kind = CoefficientKind::identity;
    } else if (kind == "drift") {
        s.allow({"kind", "potential"});
        spec.kind = CoefficientKind::drift;
        const Section p = s.child("potential");
        const std::string type = p.string("type");
        PotentialSpec& phi = spec.phi;
        if (type == "constant") {
            p.allow({"type", "value"});
            phi.type = PotentialSpec::Type::constant;
            phi.value = p.number("value");
        } else if (type == "linear") {
            p.allow({"type", "value", "gradient"});
            phi.type = PotentialSpec::Type::linear;
            phi.value = p.number("value", 0.0);
            phi.gradient = p.point("gradient");
        } else if (type == "gaussian") {
            p.allow({"type", "amplitude", "center", "sigma"});
            phi.type = PotentialSpec::Type::gaussian;
            phi.amplitude = p.number("amplitude");
            phi.center = p.point("center");
            phi.sigma = p.number("sigma");
            require(phi.sigma > 0.0, p.path("sigma"), "must be positive");
        } else {
            schema(p.path("type"), "unknown potential type '" + type + "'");
        }
    } else if (kind == "anisotropic") {
        s.allow({"kind", "ratio", "angle", "angle_gradient"});
        spec.kind = CoefficientKind::anisotropic;
        spec.ratio = s.number("ratio");
        require(spec.ratio > 0.0, s.path("ratio"), "must be positive");
        spec.angle = s.number("angle", 0.0);
        spec.angle_gradient = s.point("angle_gradient", {0.0, 0.0});
    } else {
        schema(s.path("kind"), "unknown coefficient kind '" + kind + "'");
    }
    return spec;
}

Phi0Spec parse_phi0(const Section& s)
{
    Phi0Spec p;
    const std::string kind = s.string("kind");
    if (kind == "constant") {
        s.allow({"kind", "value"});
        p.kind = Phi0Spec::Kind::constant;
        p.value = s.number("value", 1.0);
        require(p.value >= 0.0 && p.value <= 1.0, s.path("value"), "must lie in [0, 1]");
    } else if (kind == "disk") {
        s.allow({"kind", "center", "radius"});
        p.kind = Phi0Spec::Kind::disk;
        p.center = s.point("center", p.center);
        p.radius = s.number("radius", p.radius);
        require(p.radius > 0.0, s.path("radius"), "must be positive");
    } else if (kind == "annulus") {
        s.allow({"kind", "center", "radius", "inner_radius"});
        p.kind = Phi0Spec::Kind::annulus;
        p.center = s.point("center", p.center);
        p.radius = s.number("radius", p.radius);
        p.inner_radius = s.number("inner_radius", p.inner_radius);
        require(p.inner_radius > 0.0 && p.inner_radius < p.radius, s.path("inner_radius"),
                "must lie in (0, radius)");
    } else if (kind == "two_disks") {
        s.allow({"kind", "center", "radius", "center2", "radius2"});
        p.kind = Phi0Spec::Kind::two_disks;
        p.center = s.point("center", p.center);
        p.radius = s.number("radius", p.radius);
        p.center2 = s.point("center2", p.center2);
        p.radius2 = s.number("radius2", p.radius2);
        require(p.radius > 0.0, s.path("radius"), "must be positive");
        require(p.radius2 > 0.0, s.path("radius2"), "must be positive");
    } else {
        schema(s.path("kind"), "unknown preset '" + kind + "'");
    }
    return p;
}

} // namespace

Grid RunConfig::grid() const { return build_grid(origin, extent, nx); }

OptimizerOptions RunConfig::optimizer_options() const
{
    OptimizerOptions o;
    o.k = k;
    o.Lambda = Lambda;
    o.eps0 = eps0.value_or(0.0);
    o.eps_min = eps_min.value_or(0.0);
    o.eps_factor = eps_factor;
    o.phi0 = phi0;
    o.tol = tol;
    o.max_iters = max_iters;
    o.step0 = step0;
    o.eig_tol = eig_tol;
    o.seed = seed;
    o.polish_rounds = polish_rounds;
    return o;
}

RunConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    RunConfig c;
    const Section root(j, "", c.applied_defaults);
    root.allow({"box", "nx", "coefficients", "k", "Lambda", "eps", "phi0", "optimizer", "diagnostics"});

    const Section box = root.child("box");
    box.allow({"origin", "extent"});
    c.origin = box.point("origin", {0.0, 0.0});
    c.extent = box.point("extent");
    require(c.extent.x > 0.0 && c.extent.y > 0.0, box.path("extent"), "must be positive");

    const auto nx = root.integer("nx");
    require(nx >= 4 && nx <= 4096, "nx", "must lie in [4, 4096]");
    c.nx = static_cast<int>(nx);
    try {
        build_grid(c.origin, c.extent, c.nx);
    } catch (const Error& e) {
        schema("box.extent", e.what());
    }

    c.coefficients = parse_coefficients(root.child("coefficients"));

    const auto k = root.integer("k");
    require(k >= 1 && k <= 16, "k", "must lie in [1, 16]");
    c.k = static_cast<int>(k);
    c.Lambda = root.number("Lambda");
    require(c.Lambda >= 0.0, "Lambda", "must be nonnegative");

    if (root.has("eps")) {
        const Section eps = root.child("eps");
        eps.allow({"eps0", "eps_min", "factor"});
        if (eps.has("eps0")) {
            c.eps0 = eps.number("eps0");
            require(*c.eps0 > 0.0, eps.path("eps0"), "must be positive");
        } else {
            eps.note_default("eps0", "auto");
        }
        if (eps.has("eps_min")) {
            c.eps_min = eps.number("eps_min");
            require(*c.eps_min > 0.0, eps.path("eps_min"), "must be positive");
        } else {
            eps.note_default("eps_min", "auto");
        }
        if (c.eps0 && c.eps_min) require(*c.eps_min <= *c.eps0, eps.path("eps_min"), "must not exceed eps0");
        c.eps_factor = eps.number("factor", 0.5);
        require(c.eps_factor > 0.0 && c.eps_factor < 1.0, eps.path("factor"), "must lie in (0, 1)");
    } else {
        c.applied_defaults.push_back("eps.eps0=auto");
        c.applied_defaults.push_back("eps.eps_min=auto");
        c.applied_defaults.push_back("eps.factor=0.5");
    }

    if (root.has("phi0")) {
        c.phi0 = parse_phi0(root.child("phi0"));
    } else {
        c.applied_defaults.push_back("phi0=disk");
    }

    if (root.has("optimizer")) {
        const Section o = root.child("optimizer");
        o.allow({"tol", "max_iters", "step0", "seed", "polish_rounds", "eig_tol"});
        c.tol = o.number("tol", c.tol);
        require(c.tol > 0.0, o.path("tol"), "must be positive");
        c.max_iters = static_cast<int>(o.integer("max_iters", c.max_iters));
        require(c.max_iters >= 1, o.path("max_iters"), "must be at least 1");
        c.step0 = o.number("step0", c.step0);
        require(c.step0 > 0.0, o.path("step0"), "must be positive");
        const auto seed = o.integer("seed", 1);
        require(seed >= 0, o.path("seed"), "must be nonnegative");
        c.seed = static_cast<std::uint64_t>(seed);
        c.polish_rounds = static_cast<int>(o.integer("polish_rounds", c.polish_rounds));
        require(c.polish_rounds >= 0, o.path("polish_rounds"), "must be nonnegative");
        c.eig_tol = o.number("eig_tol", c.eig_tol);
        require(c.eig_tol > 0.0 && c.eig_tol < 1e-2, o.path("eig_tol"), "must lie in (0, 1e-2)");
    } else {
        c.applied_defaults.push_back("optimizer=defaults");
    }

    DiagnosticsConfig& d = c.diagnostics;
    if (root.has("diagnostics")) {
        const Section s = root.child("diagnostics");
        s.allow({"radii", "delta_tol", "quad", "d_in_h", "points", "blowup_resolution", "harnack_radius_h"});
        if (s.has("radii")) {
            const Section r = s.child("radii");
            r.allow({"count", "min_h", "max"});
            d.radii_count = static_cast<int>(r.integer("count", d.radii_count));
            require(d.radii_count >= 1 && d.radii_count <= 64, r.path("count"), "must lie in [1, 64]");
            d.radii_min_h = r.number("min_h", d.radii_min_h);
            require(d.radii_min_h >= 2.0, r.path("min_h"), "must be at least 2");
            if (r.has("max")) {
                d.radii_max = r.number("max");
                require(*d.radii_max > 0.0, r.path("max"), "must be positive");
            } else {
                r.note_default("max", "auto");
            }
        } else {
            s.note_default("radii", "defaults");
        }
        d.delta_tol = s.number("delta_tol", d.delta_tol);
        require(d.delta_tol > 0.0 && d.delta_tol < 0.25, s.path("delta_tol"), "must lie in (0, 0.25)");
        if (s.has("quad")) {
            const json& q = s.at("quad");
            if (!q.is_array() || q.size() != 2 || !q[0].is_number_integer() || !q[1].is_number_integer()) {
                schema(s.path("quad"), "expected [n_r, n_theta]");
            }
            d.quad = {q[0].get<int>(), q[1].get<int>()};
            require(d.quad.n_r >= 16 && d.quad.n_theta >= 64, s.path("quad"), "must be at least [16, 64]");
        } else {
            s.note_default("quad", "[64,256]");
        }
        d.d_in_h = s.number("d_in_h", d.d_in_h);
        require(d.d_in_h >= 1.0 && d.d_in_h <= 4.0, s.path("d_in_h"), "must lie in [1, 4]");
        d.points = static_cast<int>(s.integer("points", d.points));
        require(d.points >= 1, s.path("points"), "must be at least 1");
        d.blowup_resolution = static_cast<int>(s.integer("blowup_resolution", d.blowup_resolution));
        require(d.blowup_resolution >= 5, s.path("blowup_resolution"), "must be at least 5");
        d.harnack_radius_h = s.number("harnack_radius_h", d.harnack_radius_h);
        require(d.harnack_radius_h >= 2.0, s.path("harnack_radius_h"), "must be at least 2");
    } else {
        c.applied_defaults.push_back("diagnostics=defaults");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

void put_u32(std::string& s, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const std::string& s, std::size_t at)
{
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    return v;
}

} // namespace

void write_field(const Field& field, const std::filesystem::path& path)
{
    const Grid& g = field.grid();
    std::string s = "SSF1";
    put_u32(s, static_cast<std::uint32_t>(g.nodes_x()));
    put_u32(s, static_cast<std::uint32_t>(g.nodes_y()));
    put_u32(s, static_cast<std::uint32_t>(field.ncomp()));
    s.reserve(s.size() + 8 * field.values().size());
    for (double v : field.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int b = 0; b < 8; ++b) s.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
    write_text(path, s);
}

std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> read_field_header(const std::filesystem::path& path)
{
    const std::string s = read_text(path);
    if (s.size() < 4) throw Error(ErrorCode::TruncatedFile, "missing magic");
    if (s.compare(0, 4, "SSF1") != 0) throw Error(ErrorCode::BadMagic, "not an SSF1 file");
    if (s.size() < 16) throw Error(ErrorCode::TruncatedFile, "incomplete header");
    return {get_u32(s, 4), get_u32(s, 8), get_u32(s, 12)};
}

Field read_field(const std::filesystem::path& path, const Grid& grid)
{
    const std::string s = read_text(path);
    if (s.size() < 4) throw Error(ErrorCode::TruncatedFile, "missing magic");
    if (s.compare(0, 4, "SSF1") != 0) throw Error(ErrorCode::BadMagic, "not an SSF1 file");
    if (s.size() < 16) throw Error(ErrorCode::TruncatedFile, "incomplete header");
    const std::uint32_t mx = get_u32(s, 4);
    const std::uint32_t my = get_u32(s, 8);
    const std::uint32_t nc = get_u32(s, 12);
    const std::size_t count = static_cast<std::size_t>(mx) * my * nc;
    if (s.size() < 16 + 8 * count) throw Error(ErrorCode::TruncatedFile, "fewer values than the header promises");
    if (s.size() > 16 + 8 * count) throw Error(ErrorCode::IoError, "trailing bytes after the values");
    if (mx != static_cast<std::uint32_t>(grid.nodes_x()) || my != static_cast<std::uint32_t>(grid.nodes_y())) {
        throw Error(ErrorCode::DimensionMismatch, "field size does not match the grid");
    }
    if (nc == 0) throw Error(ErrorCode::IoError, "zero components");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[16 + 8 * i + static_cast<std::size_t>(b)]))
                << (8 * b);
        }
        std::memcpy(&values[i], &bits, 8);
    }
    return Field(grid, static_cast<int>(nc), std::move(values));
}

namespace {

void sanitize(json& j, const std::string& where, std::vector<std::string>& warnings)
{
    if (j.is_object()) {
        for (auto& [key, value] : j.items()) sanitize(value, where + "/" + key, warnings);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) sanitize(j[i], where + "/" + std::to_string(i), warnings);
    } else if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::isnan(v)) {
            j = "nan";
        } else if (std::isinf(v)) {
            j = v > 0 ? "inf" : "-inf";
        } else {
            return;
        }
        warnings.push_back("non-finite value at " + where);
    }
}

void emit(const json& j, std::string& out, int depth)
{
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(2 * depth), ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + json(it.key()).dump() + ": ";
            emit(it.value(), out, depth + 1);
        }
        out += "\n" + close + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            emit(j[i], out, depth + 1);
        }
        out += "\n" + close + "]";
    } else if (j.is_number_float()) {
        out += format_number(j.get<double>());
    } else {
        out += j.dump();
    }
}

} // namespace

std::string serialize_report(const nlohmann::json& report)
{
    json copy = report;
    std::vector<std::string> warnings;
    sanitize(copy, "", warnings);
    if (!warnings.empty()) {
        if (!copy.is_object()) throw Error(ErrorCode::IoError, "non-finite values in a non-object report");
        json& w = copy["warnings"];
        if (!w.is_array()) w = json::array();
        for (auto& s : warnings) w.push_back(s);
    }
    std::string out;
    emit(copy, out, 0);
    out += "\n";
    return out;
}

void write_report(const nlohmann::json& report, const std::filesystem::path& path)
{
    write_text(path, serialize_report(report));
}

std::string heatmap_pgm(const Field& field, int comp)
{
    if (comp < 0 || comp >= field.ncomp()) throw Error(ErrorCode::BadParams, "component out of range");
    const Grid& g = field.grid();
    const auto v = field.component(comp);
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::string out = "P5 " + std::to_string(g.nodes_x()) + " " + std::to_string(g.nodes_y()) + " 255\n";
    for (int j = g.ny(); j >= 0; --j) {
        for (int i = 0; i <= g.nx(); ++i) {
            int px = 128;
            if (hi > lo) px = static_cast<int>(std::lround(255.0 * (v[g.node(i, j)] - lo) / (hi - lo)));
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(px, 0, 255))));
        }
    }
    return out;
}

void render_heatmap(const Field& field, int comp, const std::filesystem::path& path)
{
    write_text(path, heatmap_pgm(field, comp));
}

std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

void write_manifest(const std::filesystem::path& dir, const std::vector<std::filesystem::path>& files,
                    const std::string& name)
{
    std::vector<std::string> names;
    for (const auto& f : files) {
        const auto rel = f.is_absolute() ? std::filesystem::relative(f, dir) : f;
        names.push_back(rel.generic_string());
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    json list = json::array();
    for (const auto& n : names) {
        const std::string bytes = read_text(dir / n);
        list.push_back({{"path", n}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    write_report(json{{"files", list}}, dir / name);
}

} // namespace shapelab
