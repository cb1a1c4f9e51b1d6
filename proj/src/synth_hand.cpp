#include "mufen/synth_hand.hpp"

#include <cmath>

#include "mufen/rng.hpp"

namespace mufen {

namespace {

constexpr int kRingSegments = 8;   // vertices around a capsule ring
constexpr int kCapRings = 3;       // latitude rings per hemispherical cap
constexpr double kPi = 3.14159265358979323846;

void append_box(HandMesh& mesh, const Vec3& half_extent) {
  const int base = static_cast<int>(mesh.vertices.size());
  const double hx = half_extent.x, hy = half_extent.y, hz = half_extent.z;
  // Corner order: bit 0 -> +x, bit 1 -> +y, bit 2 -> +z.
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back({(i & 1) ? hx : -hx, (i & 2) ? hy : -hy, (i & 4) ? hz : -hz});
  // Quads with outward CCW winding, split into triangles.
  constexpr int quads[6][4] = {
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  };
  for (const auto& q : quads) {
    mesh.faces.push_back({base + q[0], base + q[1], base + q[2]});
    mesh.faces.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

// Closed capsule from p0 to p1: two pole vertices, kCapRings rings per cap,
// and the two cylinder rings. Rings share vertices so the surface is closed.
void append_capsule(HandMesh& mesh, const Vec3& p0, const Vec3& p1, double radius) {
  const Vec3 axis = (p1 - p0).normalized();
  // Any stable basis perpendicular to the axis.
  const Vec3 ref = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 u = axis.cross(ref).normalized();
  const Vec3 w = axis.cross(u);

  const int base = static_cast<int>(mesh.vertices.size());
  std::vector<int> ring_start;  // index of first vertex of each ring, pole-to-pole

  mesh.vertices.push_back(p0 - axis * radius);  // bottom pole
  const int pole0 = base;

  auto push_ring = [&](const Vec3& center, double ring_r, double axial_offset) {
    ring_start.push_back(static_cast<int>(mesh.vertices.size()));
    for (int s = 0; s < kRingSegments; ++s) {
      const double a = 2.0 * kPi * s / kRingSegments;
      const Vec3 radial = u * std::cos(a) + w * std::sin(a);
      mesh.vertices.push_back(center + radial * ring_r + axis * axial_offset);
    }
  };

  // Bottom cap: latitude sweeps from the pole up to the cylinder rim.
  for (int r = 1; r <= kCapRings; ++r) {
    const double lat = -0.5 * kPi + 0.5 * kPi * r / (kCapRings + 0.0);
    push_ring(p0, radius * std::cos(lat), radius * std::sin(lat));
  }
  push_ring(p1, radius, 0.0);  // cylinder rim at p1 (rim at p0 is the last cap ring)
  // Top cap rings.
  for (int r = 1; r < kCapRings; ++r) {
    const double lat = 0.5 * kPi * r / (kCapRings + 0.0);
    push_ring(p1, radius * std::cos(lat), radius * std::sin(lat));
  }
  mesh.vertices.push_back(p1 + axis * radius);  // top pole
  const int pole1 = static_cast<int>(mesh.vertices.size()) - 1;

  auto ring_vertex = [&](int ring, int s) {
    return ring_start[ring] + (s % kRingSegments);
  };

  // Bottom fan (outward winding).
  for (int s = 0; s < kRingSegments; ++s)
    mesh.faces.push_back({pole0, ring_vertex(0, s + 1), ring_vertex(0, s)});
  // Quad bands between consecutive rings.
  const int nrings = static_cast<int>(ring_start.size());
  for (int r = 0; r + 1 < nrings; ++r)
    for (int s = 0; s < kRingSegments; ++s) {
      const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      const int c = ring_vertex(r + 1, s + 1), d = ring_vertex(r + 1, s);
      mesh.faces.push_back({a, b, c});
      mesh.faces.push_back({a, c, d});
    }
  // Top fan.
  for (int s = 0; s < kRingSegments; ++s)
    mesh.faces.push_back({pole1, ring_vertex(nrings - 1, s), ring_vertex(nrings - 1, s + 1)});
}

// Rotation of v about unit axis a by angle phi (Rodrigues).
Vec3 rotate_about(const Vec3& v, const Vec3& a, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  return v * c + a.cross(v) * s + a * (a.dot(v) * (1.0 - c));
}

struct FingerSpec {
  Vec3 base;                     // joint attached to the palm
  Vec3 direction;                // extended pointing direction (unit)
  Vec3 curl_axis;                // unit axis; curl rotates direction by -angle
  std::array<double, 3> length;  // proximal, middle, distal segment lengths
  std::array<double, 3> max_bend;  // per-joint bend at curl = 1, radians
  double radius;
};

}  // namespace

HandMesh synth_hand(std::uint64_t seed, const std::array<double, 5>& curls,
                    Handedness handedness) {
  for (double c : curls)
    require(c >= 0.0 && c <= 1.0, "finger curl parameters must lie in [0, 1]");

  Rng rng(substream_seed(seed, "synth_hand"));
  auto jitter = [&](double v, double rel) { return v * rng.uniform(1.0 - rel, 1.0 + rel); };

  HandMesh mesh;
  mesh.handedness = handedness;

  // Palm slab centered at the origin, fingers extending +y, palm facing -z.
  const Vec3 palm_half{jitter(0.040, 0.05), jitter(0.0425, 0.05), jitter(0.014, 0.05)};
  append_box(mesh, palm_half);

  const Vec3 finger_dir{0, 1, 0};
  const Vec3 finger_axis{1, 0, 0};  // curl swings fingertips toward -z
  const std::array<double, 3> finger_bend{1.4, 1.6, 1.2};

  std::array<FingerSpec, 5> fingers;
  // Thumb: attached on the -x side, pointing up-and-outward.
  const Vec3 thumb_dir = Vec3{-0.75, 0.66, 0.0}.normalized();
  fingers[0] = {Vec3{-palm_half.x * 0.95, -0.005, 0.0},
                thumb_dir,
                thumb_dir.cross(Vec3{0, 0, 1}).normalized(),
                {jitter(0.028, 0.04), jitter(0.020, 0.04), jitter(0.016, 0.04)},
                {1.2, 1.4, 1.1},
                jitter(0.0105, 0.06)};
  // Index..pinky across the palm top edge.
  const std::array<double, 4> spread{0.675, 0.24, -0.21, -0.66};
  const std::array<double, 4> scale{0.95, 1.0, 0.92, 0.74};
  for (int i = 0; i < 4; ++i) {
    const double s = scale[i];
    fingers[i + 1] = {Vec3{palm_half.x * spread[i] * -1.0, palm_half.y, 0.0},
                      finger_dir,
                      finger_axis,
                      {jitter(0.034 * s, 0.04), jitter(0.024 * s, 0.04), jitter(0.018 * s, 0.04)},
                      finger_bend,
                      jitter(0.0085, 0.06)};
  }

  std::vector<Vec3> keypoints;
  keypoints.reserve(21);
  keypoints.push_back({0.0, -palm_half.y, 0.0});  // wrist

  for (int f = 0; f < 5; ++f) {
    const FingerSpec& spec = fingers[f];
    const double curl = curls[static_cast<std::size_t>(f)];
    Vec3 joint = spec.base;
    double bend = 0.0;
    keypoints.push_back(joint);
    for (int seg = 0; seg < 3; ++seg) {
      bend += curl * spec.max_bend[static_cast<std::size_t>(seg)];
      const Vec3 dir = rotate_about(spec.direction, spec.curl_axis, -bend);
      const Vec3 next = joint + dir * spec.length[static_cast<std::size_t>(seg)];
      const double r = spec.radius * (1.0 - 0.08 * seg);
      append_capsule(mesh, joint, next, r);
      joint = next;
      keypoints.push_back(joint);
    }
  }
  mesh.keypoints = std::move(keypoints);

  if (handedness == Handedness::Left) {
    // Mirror across x and flip winding so faces stay outward CCW.
    for (Vec3& v : mesh.vertices) v.x = -v.x;
    for (Vec3& k : *mesh.keypoints) k.x = -k.x;
    for (auto& f : mesh.faces) std::swap(f[1], f[2]);
  }

  HandMesh centered = centered_on_centroid(mesh);
  validate_mesh(centered);
  return centered;
}

}  // namespace mufen
