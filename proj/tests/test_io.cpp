#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "shapelab/io.hpp"

using namespace shapelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "shapelab_io_test";
    fs::create_directories(dir);
    return dir / name;
}

const char* kMinimal = R"({
  "box": {"extent": [1, 1]},
  "nx": 64,
  "coefficients": {"kind": "identity"},
  "k": 1,
  "Lambda": 500
})";

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::BadParams;
}

std::string message_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, MinimalWithDefaults)
{
    const RunConfig c = parse_config(kMinimal);
    EXPECT_EQ(c.nx, 64);
    EXPECT_EQ(c.k, 1);
    EXPECT_EQ(c.Lambda, 500.0);
    EXPECT_EQ(c.coefficients.kind, CoefficientKind::identity);
    EXPECT_FALSE(c.eps0.has_value());
    EXPECT_EQ(c.diagnostics.delta_tol, 0.1);
    EXPECT_EQ(c.diagnostics.quad.n_r, 64);
    EXPECT_EQ(c.diagnostics.quad.n_theta, 256);
    const auto& d = c.applied_defaults;
    EXPECT_NE(std::find(d.begin(), d.end(), "box.origin=[0,0]"), d.end());
    EXPECT_NE(std::find(d.begin(), d.end(), "eps.eps0=auto"), d.end());
    EXPECT_NE(std::find(d.begin(), d.end(), "diagnostics=defaults"), d.end());
    EXPECT_EQ(c.grid().h(), 1.0 / 64);
}

TEST(Config, FullConfig)
{
    const RunConfig c = parse_config(R"({
      "box": {"origin": [0, 0], "extent": [1, 1]}, "nx": 129,
      "coefficients": {"kind": "drift", "potential": {"type": "gaussian", "amplitude": 0.5, "center": [0.4, 0.6], "sigma": 0.2}},
      "k": 2, "Lambda": 800,
      "eps": {"eps0": 0.01, "eps_min": 1e-5, "factor": 0.25},
      "phi0": {"kind": "two_disks", "center": [0.3, 0.5], "radius": 0.1, "center2": [0.7, 0.5], "radius2": 0.12},
      "optimizer": {"tol": 1e-7, "max_iters": 50, "step0": 0.5, "seed": 9, "polish_rounds": 3, "eig_tol": 1e-9},
      "diagnostics": {"radii": {"count": 6, "min_h": 3, "max": 0.1}, "delta_tol": 0.05, "quad": [32, 128],
                      "d_in_h": 1.5, "points": 10, "blowup_resolution": 21, "harnack_radius_h": 12}
    })");
    EXPECT_EQ(c.coefficients.kind, CoefficientKind::drift);
    EXPECT_EQ(c.coefficients.phi.type, PotentialSpec::Type::gaussian);
    EXPECT_EQ(c.coefficients.phi.center.y, 0.6);
    EXPECT_EQ(*c.eps_min, 1e-5);
    EXPECT_EQ(c.phi0.kind, Phi0Spec::Kind::two_disks);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.diagnostics.quad.n_theta, 128);
    EXPECT_EQ(*c.diagnostics.radii_max, 0.1);
    EXPECT_TRUE(c.applied_defaults.empty());
    const auto o = c.optimizer_options();
    EXPECT_EQ(o.k, 2);
    EXPECT_EQ(o.eps_factor, 0.25);
    EXPECT_EQ(o.polish_rounds, 3);
}

TEST(Config, SchemaErrorsNameThePath)
{
    std::string bad = kMinimal;
    bad.replace(bad.find("500"), 3, "-1");
    EXPECT_EQ(code_of([&] { parse_config(bad); }), ErrorCode::SchemaError);
    EXPECT_NE(message_of([&] { parse_config(bad); }).find("Lambda"), std::string::npos);

    std::string typo = kMinimal;
    typo.replace(typo.find("\"Lambda\""), 8, "\"lamda\"");
    EXPECT_NE(message_of([&] { parse_config(typo); }).find("lamda"), std::string::npos);

    const std::string nested = R"({"box": {"extent": [1, 1]}, "nx": 8, "coefficients": {"kind": "identity"},
        "k": 1, "Lambda": 1, "optimizer": {"tol": "small"}})";
    EXPECT_NE(message_of([&] { parse_config(nested); }).find("optimizer.tol"), std::string::npos);

    const std::string quad = R"({"box": {"extent": [1, 1]}, "nx": 8, "coefficients": {"kind": "identity"},
        "k": 1, "Lambda": 1, "diagnostics": {"quad": [8, 64]}})";
    EXPECT_EQ(code_of([&] { parse_config(quad); }), ErrorCode::SchemaError);

    const std::string cells = R"({"box": {"extent": [1, 1.03]}, "nx": 8, "coefficients": {"kind": "identity"},
        "k": 1, "Lambda": 1})";
    EXPECT_NE(message_of([&] { parse_config(cells); }).find("box.extent"), std::string::npos);

    const std::string missing = R"({"box": {"extent": [1, 1]}, "nx": 8, "k": 1, "Lambda": 1})";
    EXPECT_NE(message_of([&] { parse_config(missing); }).find("coefficients"), std::string::npos);
}

TEST(Config, MalformedJson)
{
    EXPECT_EQ(code_of([] { parse_config("{\"nx\": 8,"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_config("[1, 2]"); }), ErrorCode::SchemaError);
}

TEST(FieldIo, RandomRoundTripsAreBitExact)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1e3);
    const fs::path p = scratch("round.ssf");
    for (int trial = 0; trial < 100; ++trial) {
        const Grid g = build_grid({0, 0}, {1, 2}, 4 + trial % 7);
        Field f(g, 1 + trial % 3);
        for (double& v : f.values()) v = n(rng);
        f.values()[0] = -0.0;
        write_field(f, p);
        const Field back = read_field(p, g);
        ASSERT_EQ(back.ncomp(), f.ncomp());
        EXPECT_EQ(std::memcmp(back.values().data(), f.values().data(), 8 * f.values().size()), 0);
    }
}

TEST(FieldIo, HeaderLayout)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 4);
    Field f(g, 2);
    f.values()[0] = 1.0;
    const fs::path p = scratch("layout.ssf");
    write_field(f, p);
    const std::string s = read_text(p);
    ASSERT_EQ(s.size(), 16u + 8u * 50u);
    EXPECT_EQ(s.substr(0, 4), "SSF1");
    EXPECT_EQ(static_cast<unsigned char>(s[4]), 5);
    EXPECT_EQ(static_cast<unsigned char>(s[12]), 2);
    // 1.0 = 0x3ff0000000000000, little endian.
    EXPECT_EQ(static_cast<unsigned char>(s[22]), 0xf0);
    EXPECT_EQ(static_cast<unsigned char>(s[23]), 0x3f);
    const auto [mx, my, nc] = read_field_header(p);
    EXPECT_EQ(mx, 5u);
    EXPECT_EQ(my, 5u);
    EXPECT_EQ(nc, 2u);
}

TEST(FieldIo, CorruptFiles)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 4);
    const fs::path p = scratch("bad.ssf");
    write_field(Field(g, 1), p);
    std::string s = read_text(p);

    std::string magic = s;
    magic.replace(0, 4, "XXXX");
    write_text(p, magic);
    EXPECT_EQ(code_of([&] { read_field(p, g); }), ErrorCode::BadMagic);

    write_text(p, s.substr(0, s.size() - 8));
    EXPECT_EQ(code_of([&] { read_field(p, g); }), ErrorCode::TruncatedFile);
    write_text(p, s.substr(0, 10));
    EXPECT_EQ(code_of([&] { read_field(p, g); }), ErrorCode::TruncatedFile);

    write_text(p, s);
    EXPECT_EQ(code_of([&] { read_field(p, build_grid({0, 0}, {1, 1}, 8)); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { read_field(scratch("missing.ssf"), g); }), ErrorCode::IoError);
}

TEST(Report, SortedKeysAndDigits)
{
    nlohmann::json r;
    r["zeta"] = 1;
    r["alpha"] = 0.1;
    r["mid"] = {{"b", 2.5}, {"a", "x"}};
    const std::string s = serialize_report(r);
    EXPECT_LT(s.find("alpha"), s.find("mid"));
    EXPECT_LT(s.find("mid"), s.find("zeta"));
    EXPECT_LT(s.find("\"a\""), s.find("\"b\""));
    EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
    EXPECT_EQ(s, serialize_report(r));
    EXPECT_EQ(nlohmann::json::parse(s)["alpha"].get<double>(), 0.1);
}

TEST(Report, NonFiniteValuesBecomeStrings)
{
    nlohmann::json r;
    r["points"] = nlohmann::json::array({{{"defect", std::nan("")}}});
    r["max"] = std::numeric_limits<double>::infinity();
    const auto parsed = nlohmann::json::parse(serialize_report(r));
    EXPECT_EQ(parsed["points"][0]["defect"], "nan");
    EXPECT_EQ(parsed["max"], "inf");
    ASSERT_EQ(parsed["warnings"].size(), 2u);
    EXPECT_NE(parsed["warnings"][0].get<std::string>().find("/max"), std::string::npos);
}

TEST(Report, EmptyListAndFileIdentity)
{
    nlohmann::json r;
    r["diagnostics"] = nlohmann::json::array();
    const std::string s = serialize_report(r);
    EXPECT_TRUE(nlohmann::json::parse(s)["diagnostics"].is_array());
    const fs::path a = scratch("a.json");
    const fs::path b = scratch("b.json");
    write_report(r, a);
    write_report(r, b);
    EXPECT_EQ(read_text(a), read_text(b));
}

TEST(Heatmap, ConstantAndRamp)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    const std::string c = heatmap_pgm(sample_function(g, [](Point) { return 3.0; }), 0);
    const std::string header = "P5 9 9 255\n";
    ASSERT_EQ(c.size(), header.size() + 81);
    EXPECT_EQ(c.substr(0, header.size()), header);
    for (std::size_t i = header.size(); i < c.size(); ++i) EXPECT_EQ(static_cast<unsigned char>(c[i]), 128);

    const std::string x = heatmap_pgm(sample_function(g, [](Point p) { return p.x; }), 0);
    for (int row = 0; row < 9; ++row) {
        EXPECT_EQ(static_cast<unsigned char>(x[header.size() + 9 * row]), 0);
        EXPECT_EQ(static_cast<unsigned char>(x[header.size() + 9 * row + 8]), 255);
    }
    const std::string y = heatmap_pgm(sample_function(g, [](Point p) { return p.y; }), 0);
    EXPECT_EQ(static_cast<unsigned char>(y[header.size()]), 255);
    EXPECT_EQ(static_cast<unsigned char>(y[header.size() + 80]), 0);
    EXPECT_EQ(code_of([&] { heatmap_pgm(Field(g, 1), 1); }), ErrorCode::BadParams);
}

TEST(Manifest, DigestsAndSorting)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const fs::path dir = fs::temp_directory_path() / "shapelab_manifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "fields");
    write_text(dir / "z.txt", "abc");
    write_text(dir / "fields" / "a.bin", "");
    write_manifest(dir, {"z.txt", dir / "fields" / "a.bin"});
    const auto m = nlohmann::json::parse(read_text(dir / "manifest.json"));
    ASSERT_EQ(m["files"].size(), 2u);
    EXPECT_EQ(m["files"][0]["path"], "fields/a.bin");
    EXPECT_EQ(m["files"][1]["sha256"], sha256_hex("abc"));
    EXPECT_EQ(m["files"][1]["bytes"], 3);
}
