#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mufen/image_io.hpp"
#include "mufen/render.hpp"
#include "mufen/rng.hpp"
#include "mufen/synth_hand.hpp"

using namespace mufen;

namespace {

HandMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  HandMesh m;
  m.vertices = {a, b, c};
  m.faces = {{0, 1, 2}};
  return m;
}

// Two triangles forming the rectangle [x0,x1] x [y0,y1] at depth z.
HandMesh quad(double x0, double x1, double y0, double y1, double z) {
  HandMesh m;
  m.vertices = {{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

const CameraPose kIdentityCam{{0, 0, 0}, WeakPerspective{1.0}};

}  // namespace

TEST_CASE("screen-filling triangle gives constant depth everywhere") {
  const HandMesh m = triangle({-4, -4, 2}, {4, -4, 2}, {0, 6, 2});
  const Framebuffer fb = rasterize(m, kIdentityCam, 32, 32);
  CHECK(fb.covered_count() == 32u * 32u);
  for (double d : fb.depth) CHECK(d == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("z-buffer keeps the nearer triangle in the overlap") {
  HandMesh m = quad(-2, 2, -2, 2, 2.0);  // far quad covering everything
  const HandMesh near_tri = triangle({-0.5, -0.5, 1.0}, {0.5, -0.5, 1.0}, {0, 0.5, 1.0});
  const int base = static_cast<int>(m.vertices.size());
  for (const Vec3& v : near_tri.vertices) m.vertices.push_back(v);
  for (const auto& f : near_tri.faces)
    m.faces.push_back({f[0] + base, f[1] + base, f[2] + base});

  const Framebuffer fb = rasterize(m, kIdentityCam, 64, 64);
  // Center pixel lies inside the near triangle.
  CHECK(fb.depth[32 * 64 + 32] == doctest::Approx(1.0));
  // A corner pixel only sees the far quad.
  CHECK(fb.depth[2 * 64 + 2] == doctest::Approx(2.0));
}

TEST_CASE("mesh fully behind a perspective camera renders background") {
  const HandMesh m = triangle({-1, -1, -2}, {1, -1, -2}, {0, 1, -2});
  const CameraPose cam{{0, 0, 0}, Perspective{1.0}};
  const Framebuffer fb = rasterize(m, cam, 16, 16);
  CHECK(fb.covered_count() == 0);
  for (std::uint8_t b : fb.rgb) CHECK(b == 0);
}

TEST_CASE("empty mesh renders background, not an error") {
  HandMesh m;
  const Framebuffer fb = rasterize(m, kIdentityCam, 16, 16);
  CHECK(fb.covered_count() == 0);
}

TEST_CASE("resolution below 8x8 is rejected") {
  CHECK_THROWS_AS(rasterize(HandMesh{}, kIdentityCam, 4, 16), ValidationError);
}

TEST_CASE("shade: ambient-only pixels quantize to (77,77,69)") {
  // Fronto-parallel quad; a single directional light orthogonal to its
  // normal contributes max(0, n.l) = 0, leaving ambient only.
  const HandMesh m = quad(-2, 2, -2, 2, 1.0);
  Framebuffer fb = rasterize(m, kIdentityCam, 16, 16);
  LightRig rig;
  rig.directional.push_back({Vec3{1, 0, 0}, {5, 5, 5}});
  shade(fb, rig, Material{});
  REQUIRE(fb.covered(8, 8));
  const std::size_t i = (8 * 16 + 8) * 3;
  CHECK(fb.rgb[i + 0] == 77);
  CHECK(fb.rgb[i + 1] == 77);
  CHECK(fb.rgb[i + 2] == 69);
}

TEST_CASE("shade: saturated lighting clamps to (255,255,230)") {
  const HandMesh m = quad(-2, 2, -2, 2, 1.0);
  Framebuffer fb = rasterize(m, kIdentityCam, 16, 16);
  LightRig rig;
  rig.directional.push_back({Vec3{0, 0, -1}, {10, 10, 10}});
  shade(fb, rig, Material{});
  const std::size_t i = (8 * 16 + 8) * 3;
  CHECK(fb.rgb[i + 0] == 255);
  CHECK(fb.rgb[i + 1] == 255);
  CHECK(fb.rgb[i + 2] == 230);
}

TEST_CASE("shade: background stays exactly black") {
  const HandMesh m = triangle({-0.2, -0.2, 1}, {0.2, -0.2, 1}, {0, 0.2, 1});
  Framebuffer fb = rasterize(m, kIdentityCam, 32, 32);
  shade(fb, LightRig::default_rig(), Material{});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!fb.covered(x, y)) {
        const std::size_t i = static_cast<std::size_t>(y * 32 + x) * 3;
        CHECK(fb.rgb[i] == 0);
        CHECK(fb.rgb[i + 1] == 0);
        CHECK(fb.rgb[i + 2] == 0);
      }
}

TEST_CASE("shade: adding a light never darkens a pixel") {
  const HandMesh hand = synth_hand(5, {0.2, 0.4, 0.6, 0.8, 0.3});
  const CameraPose cam{{0, 0, 0.6}, WeakPerspective{4.5}};
  Framebuffer base = rasterize(hand, cam, 64, 64);
  Framebuffer more = base;
  LightRig rig = LightRig::default_rig();
  shade(base, rig, Material{});
  rig.directional.push_back({Vec3{0.0, 0.0, -1.0}, {0.3, 0.3, 0.3}});
  shade(more, rig, Material{});
  for (std::size_t i = 0; i < base.rgb.size(); ++i) CHECK(more.rgb[i] >= base.rgb[i]);
}

TEST_CASE("material fixes metallic 0 and roughness 1") {
  Material m;
  m.metallic = 0.5;
  const HandMesh mesh = quad(-1, 1, -1, 1, 1);
  Framebuffer fb = rasterize(mesh, kIdentityCam, 16, 16);
  CHECK_THROWS_AS(shade(fb, LightRig::default_rig(), m), ValidationError);

  const Material left = Material::for_handedness(Handedness::Left);
  double albedo[3];
  left.albedo(albedo);
  CHECK(albedo[0] == doctest::Approx(0.9));
  CHECK(albedo[1] == doctest::Approx(1.0));
  CHECK(albedo[2] == doctest::Approx(1.0));  // 0.9 + 0.1
}

TEST_CASE("depth normalization: near 1, far 0, constant 1, empty zeros") {
  SUBCASE("slanted quad spans the full range") {
    HandMesh m;
    m.vertices = {{-2, -2, 1.0}, {2, -2, 2.0}, {2, 2, 2.0}, {-2, 2, 1.0}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    const GrayImage img = render_depth(m, kIdentityCam, 64, 64);
    double lo = 2.0, hi = -1.0;
    for (double v : img.pixels) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(hi == doctest::Approx(1.0).epsilon(0.05));
    CHECK(lo == 0.0);
  }
  SUBCASE("constant-depth surface maps to exactly 1") {
    const GrayImage img = render_depth(quad(-2, 2, -2, 2, 1.5), kIdentityCam, 16, 16);
    for (double v : img.pixels) CHECK(v == 1.0);
  }
  SUBCASE("empty mesh gives all zeros") {
    const GrayImage img = render_depth(HandMesh{}, kIdentityCam, 16, 16);
    for (double v : img.pixels) CHECK(v == 0.0);
  }
}

TEST_CASE("silhouette_area basics") {
  SUBCASE("half-frame quad covers 0.5 up to one pixel row") {
    // After centroid centering the quad spans y in [-0.5, 0.5]; the camera
    // shift moves it back to the lower half of the frame.
    const HandMesh m = quad(-1.5, 1.5, -1.0, 0.0, 1.0);
    const CameraPose cam{{0.0, -0.5, 1.0}, WeakPerspective{1.0}};
    const double area = silhouette_area(m, ViewId::Front, cam, 128, 128);
    CHECK(area == doctest::Approx(0.5).epsilon(1.0 / 128.0));
  }
  SUBCASE("edge-on view of a flat quad is at most two columns") {
    const HandMesh m = quad(-0.8, 0.8, -0.8, 0.8, 0.0);
    const CameraPose cam{{0.0, 0.0, 1.0}, WeakPerspective{1.0}};
    const double area = silhouette_area(m, ViewId::Left, cam, 128, 128);
    CHECK(area <= 2.0 / 128.0);
  }
  SUBCASE("perspective cameras are rejected") {
    const HandMesh m = quad(-1, 1, -1, 1, 2.0);
    const CameraPose cam{{0, 0, 0}, Perspective{1.0}};
    CHECK_THROWS_AS(silhouette_area(m, ViewId::Front, cam, 64, 64),
                    UnsupportedProjectionError);
  }
}

TEST_CASE("opposite views have mirror silhouettes") {
  const CameraPose cam{{0.01, -0.02, 0.6}, WeakPerspective{4.5}};
  Rng rng(17);
  for (int k = 0; k < 4; ++k) {
    std::array<double, 5> curls;
    for (double& c : curls) c = rng.uniform();
    const HandMesh hand = synth_hand(100 + static_cast<std::uint64_t>(k), curls);
    for (const auto& [a, b] : std::vector<std::pair<ViewId, ViewId>>{
             {ViewId::Front, ViewId::Rear},
             {ViewId::Left, ViewId::Right},
             {ViewId::Top, ViewId::Bottom}}) {
      const double area_a = silhouette_area(hand, a, cam, 512, 512);
      const double area_b = silhouette_area(hand, b, cam, 512, 512);
      REQUIRE(area_a > 0.0);
      CHECK(std::abs(area_a - area_b) / area_a <= 0.005);
    }
  }
}

TEST_CASE("rendering is bit-identical across thread counts and repeats") {
  const HandMesh hand = synth_hand(8, {0.1, 0.9, 0.5, 0.3, 0.7});
  const CameraPose cam{{0, 0, 0.6}, WeakPerspective{4.5}};
  const Framebuffer a = rasterize(hand, cam, 128, 128, 1);
  const Framebuffer b = rasterize(hand, cam, 128, 128, 4);
  const Framebuffer c = rasterize(hand, cam, 128, 128, 1);
  REQUIRE(a.depth.size() == b.depth.size());
  for (std::size_t i = 0; i < a.depth.size(); ++i) {
    const bool fa = std::isfinite(a.depth[i]), fb_ = std::isfinite(b.depth[i]);
    CHECK(fa == fb_);
    if (fa && fb_) {
      CHECK(a.depth[i] == b.depth[i]);
      CHECK(a.depth[i] == c.depth[i]);
    }
    for (int ch = 0; ch < 3; ++ch) {
      CHECK(a.normal[i * 3 + ch] == b.normal[i * 3 + ch]);
    }
  }
}

TEST_CASE("ppm and pgm round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const HandMesh hand = synth_hand(2, {0.5, 0.5, 0.5, 0.5, 0.5});
  const CameraPose cam{{0, 0, 0.6}, WeakPerspective{4.5}};
  const Framebuffer fb = render_view(hand, cam, ViewId::Front, 64, 64);

  const auto ppm = fs::temp_directory_path() / "rt.ppm";
  write_ppm(fb, ppm.string());
  int w = 0, h = 0;
  const auto rgb = read_ppm(ppm.string(), w, h);
  CHECK(w == 64);
  CHECK(h == 64);
  CHECK(rgb == fb.rgb);

  const GrayImage depth = normalize_depth(fb);
  const auto pgm = fs::temp_directory_path() / "rt.pgm";
  write_pgm16(depth, pgm.string());
  const GrayImage back = read_pgm16(pgm.string());
  REQUIRE(back.pixels.size() == depth.pixels.size());
  for (std::size_t i = 0; i < depth.pixels.size(); ++i)
    CHECK(back.pixels[i] == doctest::Approx(depth.pixels[i]).epsilon(1.0 / 65535.0));
  // Background must export as exactly zero.
  for (std::size_t i = 0; i < depth.pixels.size(); ++i)
    if (!std::isfinite(fb.depth[i])) CHECK(back.pixels[i] == 0.0);
}

TEST_CASE("light rig validation") {
  LightRig rig = LightRig::default_rig();
  CHECK_NOTHROW(rig.validate());
  rig.directional.push_back({Vec3{1, 1, 0}, {1, 1, 1}});  // not unit
  CHECK_THROWS_AS(rig.validate(), ValidationError);
  CHECK(LightRig::default_rig().raymond.size() == 3);
  CHECK(LightRig::with_view_compensation().directional.size() ==
        LightRig::default_rig().directional.size() + 1);
}
