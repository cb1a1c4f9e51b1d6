#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "mufen/geometry.hpp"
#include "mufen/obj_io.hpp"
#include "mufen/rng.hpp"
#include "mufen/synth_hand.hpp"

using namespace mufen;

namespace {

constexpr double kPi = 3.14159265358979323846;

bool vec_close(const Vec3& a, const Vec3& b, double tol = 1e-12) {
  return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol &&
         std::abs(a.z - b.z) <= tol;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("rot_y basics") {
  const Mat3 id = rot_y(0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(id(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));

  const Mat3 pi = rot_y(kPi);
  CHECK(pi(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pi(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pi(2, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pi(0, 2)) < 1e-12);
  CHECK(std::abs(pi(2, 0)) < 1e-12);

  CHECK(vec_close(rot_y(kPi / 2) * Vec3{1, 2, 3}, {3, 2, -1}));
  CHECK_THROWS_AS(rot_y(std::nan("")), ValidationError);
}

TEST_CASE("rot_x basics") {
  const Mat3 id = rot_x(0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(id(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
  CHECK(vec_close(rot_x(kPi / 2) * Vec3{1, 2, 3}, {1, -3, 2}));
  CHECK(vec_close(rot_x(-kPi / 2) * Vec3{0, 1, 0}, {0, 0, -1}));
  CHECK_THROWS_AS(rot_x(std::numeric_limits<double>::infinity()), ValidationError);
}

TEST_CASE("rotation matrices are orthonormal with det +1") {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const double angle = rng.uniform(-10.0, 10.0);
    for (const Mat3& r : {rot_y(angle), rot_x(angle)}) {
      const Mat3 rtr = r.transposed() * r;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          CHECK(std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
      const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                         r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                         r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
      CHECK(std::abs(det - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("left rotation is the inverse of right, componentwise") {
  const Mat3 left = rot_y(-kPi / 2);
  const Mat3 right_t = rot_y(kPi / 2).transposed();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(left(i, j) == doctest::Approx(right_t(i, j)).epsilon(1e-15));
}

namespace {

HandMesh single_vertex_mesh(const Vec3& v) {
  HandMesh m;
  m.vertices = {v, {0.5, 0.5, 0.5}, {-0.5, -0.25, 0.125}};
  m.faces = {{0, 1, 2}};
  return m;
}

}  // namespace

TEST_CASE("transform_to_view per-view rules") {
  const CameraPose cam{{0.1, 0.2, 2.0}, WeakPerspective{1.0}};
  HandMesh m;
  m.vertices = {{1, 2, 3}};
  m.faces = {};

  SUBCASE("front is the identity") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Front);
    CHECK(vec_close(mesh.vertices[0], {1, 2, 3}, 0.0));
    CHECK(vec_close(camera.translation, {0.1, 0.2, 2.0}, 0.0));
  }
  SUBCASE("rear mirrors x and z for vertices, x only for the camera") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Rear);
    CHECK(vec_close(mesh.vertices[0], {-1, 2, -3}));
    CHECK(vec_close(camera.translation, {-0.1, 0.2, 2.0}));
  }
  SUBCASE("right side view") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Right);
    CHECK(vec_close(mesh.vertices[0], {3, 2, -1}));
    CHECK(vec_close(camera.translation, {0.0, 0.2, -0.1}));
  }
  SUBCASE("left side view") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Left);
    CHECK(vec_close(mesh.vertices[0], {-3, 2, 1}));
    CHECK(vec_close(camera.translation, {0.0, 0.2, 0.1}));
  }
  SUBCASE("top view") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Top);
    CHECK(vec_close(mesh.vertices[0], {1, -3, 2}));
    CHECK(vec_close(camera.translation, {0.1, 0.0, 0.2}));
  }
  SUBCASE("bottom view") {
    const auto [mesh, camera] = transform_to_view(m, cam, ViewId::Bottom);
    CHECK(vec_close(mesh.vertices[0], {1, 3, -2}));
    CHECK(vec_close(camera.translation, {0.1, 0.0, -0.2}));
  }
}

TEST_CASE("closed-form component rules hold for random vertices") {
  Rng rng(42);
  const CameraPose cam{{0.0, 0.0, 1.0}, WeakPerspective{1.0}};
  for (int k = 0; k < 1000; ++k) {
    const Vec3 v{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const HandMesh m = single_vertex_mesh(v);
    auto out = [&](ViewId view) {
      return transform_to_view(m, cam, view).first.vertices[0];
    };
    CHECK(vec_close(out(ViewId::Rear), {-v.x, v.y, -v.z}));
    CHECK(vec_close(out(ViewId::Right), {v.z, v.y, -v.x}));
    CHECK(vec_close(out(ViewId::Left), {-v.z, v.y, v.x}));
    CHECK(vec_close(out(ViewId::Top), {v.x, -v.z, v.y}));
    CHECK(vec_close(out(ViewId::Bottom), {v.x, v.z, -v.y}));
  }
}

TEST_CASE("rear transform is an involution") {
  Rng rng(3);
  const CameraPose cam{{0.3, -0.1, 1.5}, WeakPerspective{2.0}};
  for (int k = 0; k < 100; ++k) {
    const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const HandMesh m = single_vertex_mesh(v);
    const auto [m1, c1] = transform_to_view(m, cam, ViewId::Rear);
    const auto [m2, c2] = transform_to_view(m1, c1, ViewId::Rear);
    CHECK(vec_close(m2.vertices[0], v));
    CHECK(vec_close(c2.translation, cam.translation));
  }
}

TEST_CASE("pair partner is an involution over all six views") {
  for (ViewId v : kAllViews) {
    CHECK(pair_partner(pair_partner(v)) == v);
    CHECK(pair_partner(v) != v);
  }
  CHECK(parse_view("front") == ViewId::Front);
  CHECK(view_name(ViewId::Bottom) == "bottom");
  CHECK_THROWS_AS(parse_view("sideways"), ValidationError);
}

TEST_CASE("mesh validation") {
  HandMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  CHECK_NOTHROW(validate_mesh(m));

  SUBCASE("face index out of range") {
    m.faces = {{0, 1, 3}};
    CHECK_THROWS_AS(validate_mesh(m), ValidationError);
  }
  SUBCASE("degenerate face") {
    m.faces = {{0, 1, 1}};
    CHECK_THROWS_AS(validate_mesh(m), ValidationError);
  }
  SUBCASE("mano_strict needs 778 vertices and 21 keypoints") {
    CHECK_THROWS_AS(validate_mesh(m, true), ValidationError);
    HandMesh strict;
    strict.vertices.resize(778, Vec3{0, 0, 0});
    for (std::size_t i = 0; i < strict.vertices.size(); ++i)
      strict.vertices[i].x = static_cast<double>(i);
    strict.faces = {{0, 1, 2}};
    strict.keypoints = std::vector<Vec3>(21, Vec3{0, 0, 0});
    CHECK_NOTHROW(validate_mesh(strict, true));
  }
}

TEST_CASE("centering moves the centroid to the origin") {
  Rng rng(5);
  HandMesh m;
  for (int i = 0; i < 50; ++i)
    m.vertices.push_back({rng.uniform(0, 4), rng.uniform(-3, 9), rng.uniform(1, 2)});
  const HandMesh c = centered_on_centroid(m);
  CHECK(vec_close(c.centroid(), {0, 0, 0}, 1e-12));
}

// --- OBJ I/O -----------------------------------------------------------------

TEST_CASE("obj: single triangle") {
  const auto path = temp_file("single_tri.obj");
  std::ofstream(path) << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
  const HandMesh m = load_obj(path.string());
  CHECK(m.vertices.size() == 3);
  CHECK(m.faces.size() == 1);
  CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("obj: quad fans into two triangles") {
  const auto path = temp_file("quad.obj");
  std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  const HandMesh m = load_obj(path.string());
  REQUIRE(m.faces.size() == 2);
  CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
  CHECK(m.faces[1] == std::array<int, 3>{0, 2, 3});
}

TEST_CASE("obj: slash-delimited face tokens use the position index") {
  const auto path = temp_file("slashes.obj");
  std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 3/3\n";
  const HandMesh m = load_obj(path.string());
  CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("obj: parse errors carry line numbers") {
  SUBCASE("index zero") {
    const auto path = temp_file("zero_idx.obj");
    std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
    try {
      load_obj(path.string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("1-based") != std::string::npos);
    }
  }
  SUBCASE("out of range index") {
    const auto path = temp_file("oob_idx.obj");
    std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    CHECK_THROWS_AS(load_obj(path.string()), ParseError);
  }
  SUBCASE("malformed vertex") {
    const auto path = temp_file("bad_vertex.obj");
    std::ofstream(path) << "v 0 zero 0\n";
    CHECK_THROWS_AS(load_obj(path.string()), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_obj("/nonexistent/missing.obj"), ParseError);
  }
}

TEST_CASE("obj round-trip preserves topology exactly and geometry to 1e-6") {
  const HandMesh hand = synth_hand(99, {0.1, 0.4, 0.9, 0.2, 0.6});
  const auto path = temp_file("roundtrip.obj");
  save_obj(hand, path.string());
  const HandMesh back = load_obj(path.string());
  REQUIRE(back.vertices.size() == hand.vertices.size());
  REQUIRE(back.faces == hand.faces);
  for (std::size_t i = 0; i < hand.vertices.size(); ++i)
    CHECK(vec_close(back.vertices[i], hand.vertices[i], 1e-6));
}

TEST_CASE("camera json round-trip") {
  const auto path = temp_file("camera.json");
  const CameraPose cam{{0.25, -0.5, 3.0}, WeakPerspective{4.5}};
  save_camera_json(cam, path.string());
  const CameraPose back = load_camera_json(path.string());
  CHECK(vec_close(back.translation, cam.translation, 0.0));
  CHECK(std::get<WeakPerspective>(back.projection).scale == doctest::Approx(4.5));

  const CameraPose persp{{0, 0, 1}, Perspective{0.9}};
  save_camera_json(persp, path.string());
  CHECK(std::get<Perspective>(load_camera_json(path.string()).projection).yfov ==
        doctest::Approx(0.9));

  std::ofstream(path) << "{\"translation\":[0,0,1]}";
  CHECK_THROWS_AS(load_camera_json(path.string()), ParseError);
}

// --- synthetic hands --------------------------------------------------------

TEST_CASE("synth_hand is deterministic") {
  const std::array<double, 5> curls{0.2, 0.5, 0.8, 0.1, 0.9};
  const HandMesh a = synth_hand(1234, curls);
  const HandMesh b = synth_hand(1234, curls);
  REQUIRE(a.vertices.size() == b.vertices.size());
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    CHECK(a.vertices[i].x == b.vertices[i].x);
    CHECK(a.vertices[i].y == b.vertices[i].y);
    CHECK(a.vertices[i].z == b.vertices[i].z);
  }
  CHECK(a.faces == b.faces);

  const HandMesh c = synth_hand(1235, curls);
  bool any_diff = false;
  for (std::size_t i = 0; i < std::min(a.vertices.size(), c.vertices.size()); ++i)
    any_diff = any_diff || a.vertices[i].x != c.vertices[i].x;
  CHECK(any_diff);
}

TEST_CASE("synth_hand geometry contracts") {
  for (const std::uint64_t seed : {1ull, 7ull, 21ull}) {
    const HandMesh flat = synth_hand(seed, {0, 0, 0, 0, 0});
    REQUIRE(flat.keypoints.has_value());
    REQUIRE(flat.keypoints->size() == 21);
    CHECK_NOTHROW(validate_mesh(flat));

    // Centered at the origin with bounding radius <= 0.15 m.
    CHECK(vec_close(flat.centroid(), {0, 0, 0}, 1e-9));
    double max_r = 0.0;
    for (const Vec3& v : flat.vertices) max_r = std::max(max_r, v.norm());
    CHECK(max_r <= 0.15);

    // Open hand: fingertip keypoints stay near the palm plane.
    for (const std::size_t tip : {4u, 8u, 12u, 16u, 20u}) {
      const Vec3 rel = (*flat.keypoints)[tip] - (*flat.keypoints)[0];
      (void)rel;
      // Tip z is measured in the mesh frame; centering only shifts, so use
      // the difference against the wrist keypoint's z.
      CHECK(std::abs((*flat.keypoints)[tip].z - (*flat.keypoints)[0].z) < 0.02);
    }

    // Fist: fingertips pull within 0.05 m of the palm centroid (the palm box
    // vertices come first in the generator layout).
    const HandMesh fist = synth_hand(seed, {1, 1, 1, 1, 1});
    Vec3 palm{0, 0, 0};
    for (int i = 0; i < 8; ++i) palm = palm + fist.vertices[static_cast<std::size_t>(i)];
    palm = palm / 8.0;
    for (const std::size_t tip : {4u, 8u, 12u, 16u, 20u})
      CHECK(((*fist.keypoints)[tip] - palm).norm() < 0.05);
  }
}

TEST_CASE("synth_hand meshes are closed and outward-oriented") {
  for (const Handedness handed : {Handedness::Right, Handedness::Left}) {
    const HandMesh m = synth_hand(3, {0.3, 0.7, 0.1, 0.9, 0.5}, handed);
    // Closed manifold: every undirected edge borders exactly two faces.
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& f : m.faces)
      for (int e = 0; e < 3; ++e) {
        const int a = f[static_cast<std::size_t>(e)];
        const int b = f[static_cast<std::size_t>((e + 1) % 3)];
        edge_count[{std::min(a, b), std::max(a, b)}]++;
      }
    for (const auto& [edge, count] : edge_count) CHECK(count == 2);

    // Outward orientation: divergence-theorem volume is positive.
    double vol6 = 0.0;
    for (const auto& f : m.faces) {
      const Vec3& a = m.vertices[static_cast<std::size_t>(f[0])];
      const Vec3& b = m.vertices[static_cast<std::size_t>(f[1])];
      const Vec3& c = m.vertices[static_cast<std::size_t>(f[2])];
      vol6 += a.dot(b.cross(c));
    }
    CHECK(vol6 > 0.0);
  }
}

TEST_CASE("synth_hand rejects bad curls") {
  CHECK_THROWS_AS(synth_hand(1, {0.5, -0.1, 0.5, 0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(synth_hand(1, {0.5, 1.1, 0.5, 0.5, 0.5}), ValidationError);
}
