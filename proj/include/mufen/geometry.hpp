#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mufen/common.hpp"

namespace mufen {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? *this / n : Vec3{0.0, 0.0, 0.0};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
};

// Rotation about the Y axis: [[cos,0,sin],[0,1,0],[-sin,0,cos]].
Mat3 rot_y(double theta);

// Rotation about the X axis: [[1,0,0],[0,cos,-sin],[0,sin,cos]].
Mat3 rot_x(double phi);

enum class Handedness : std::uint8_t { Left, Right };

// Triangle mesh of one hand. Faces are 0-based CCW index triples. Keypoints,
// when present, follow the 21-joint layout (wrist + 4 joints per finger,
// thumb..pinky, tip last).
struct HandMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  Handedness handedness = Handedness::Right;
  std::optional<std::vector<Vec3>> keypoints;

  Vec3 centroid() const;
};

// Checks index bounds, face degeneracy and vertex finiteness. With
// `mano_strict` the mesh must have exactly 778 vertices and 21 keypoints.
void validate_mesh(const HandMesh& mesh, bool mano_strict = false);

// Translates the mesh so its vertex centroid (and keypoints with it) sits at
// the origin. View rotations are applied to centered meshes so every view
// turns about the hand rather than the world origin.
HandMesh centered_on_centroid(const HandMesh& mesh);

struct WeakPerspective {
  double scale = 1.0;  // > 0
};
struct Perspective {
  double yfov = 1.0;  // radians, in (0, pi)
};
using Projection = std::variant<WeakPerspective, Perspective>;

struct CameraPose {
  Vec3 translation{0.0, 0.0, 0.0};
  Projection projection = WeakPerspective{1.0};
};

void validate_camera(const CameraPose& camera);

enum class ViewId : std::uint8_t { Front, Rear, Left, Right, Top, Bottom };

inline constexpr std::array<ViewId, 6> kAllViews = {ViewId::Front, ViewId::Rear,
                                                    ViewId::Left,  ViewId::Right,
                                                    ViewId::Top,   ViewId::Bottom};

// The opposite view along the same axis; an involution.
ViewId pair_partner(ViewId view);

std::string view_name(ViewId view);
ViewId parse_view(const std::string& name);

// Rotation applied to front-view vertices to obtain the given view:
// Rear R_y(pi), Right R_y(pi/2), Left R_y(-pi/2), Top R_x(pi/2),
// Bottom R_x(-pi/2). Entries are exact (no trig round-off).
Mat3 view_rotation(ViewId view);

// Maps a front-view mesh and camera to the given view. Vertices (and
// keypoints) are rotated by view_rotation; the camera translation follows the
// per-view override rules:
//   Front  (tx, ty, tz)      Rear   (-tx, ty, tz)
//   Right  (0, ty, -tx)      Left   (0, ty, tx)
//   Top    (tx, 0, ty)       Bottom (tx, 0, -ty)
// Inputs are used as given; center the mesh first (centered_on_centroid) when
// the views should orbit the hand.
std::pair<HandMesh, CameraPose> transform_to_view(const HandMesh& mesh,
                                                  const CameraPose& camera,
                                                  ViewId view);

}  // namespace mufen
