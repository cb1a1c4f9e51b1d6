#include "mufen/geometry.hpp"

#include <cmath>

namespace mufen {

Mat3 rot_y(double theta) {
  require_finite(theta, "rot_y(theta)");
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}

Mat3 rot_x(double phi) {
  require_finite(phi, "rot_x(phi)");
  const double c = std::cos(phi), s = std::sin(phi);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Vec3 HandMesh::centroid() const {
  Vec3 c{0.0, 0.0, 0.0};
  if (vertices.empty()) return c;
  for (const Vec3& v : vertices) c = c + v;
  return c / static_cast<double>(vertices.size());
}

void validate_mesh(const HandMesh& mesh, bool mano_strict) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices)
    if (!v.finite()) throw ValidationError("mesh vertex has non-finite component");
  for (const auto& f : mesh.faces) {
    for (int idx : f)
      if (idx < 0 || idx >= n)
        throw ValidationError("face index " + std::to_string(idx) +
                              " out of range for " + std::to_string(n) + " vertices");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw ValidationError("degenerate face: repeated vertex index " +
                            std::to_string(f[0] == f[1] ? f[0] : f[2]));
  }
  if (mesh.keypoints)
    for (const Vec3& k : *mesh.keypoints)
      if (!k.finite()) throw ValidationError("keypoint has non-finite component");
  if (mano_strict) {
    if (n != 778)
      throw ValidationError("mano_strict: expected 778 vertices, got " + std::to_string(n));
    if (!mesh.keypoints || mesh.keypoints->size() != 21)
      throw ValidationError("mano_strict: expected 21 keypoints");
  }
}

HandMesh centered_on_centroid(const HandMesh& mesh) {
  HandMesh out = mesh;
  const Vec3 c = mesh.centroid();
  for (Vec3& v : out.vertices) v = v - c;
  if (out.keypoints)
    for (Vec3& k : *out.keypoints) k = k - c;
  return out;
}

void validate_camera(const CameraPose& camera) {
  if (!camera.translation.finite())
    throw ValidationError("camera translation has non-finite component");
  if (const auto* wp = std::get_if<WeakPerspective>(&camera.projection)) {
    if (!(wp->scale > 0.0) || !std::isfinite(wp->scale))
      throw ValidationError("weak_perspective scale must be positive and finite");
  } else {
    const auto& p = std::get<Perspective>(camera.projection);
    if (!(p.yfov > 0.0) || !(p.yfov < 3.14159265358979323846))
      throw ValidationError("perspective yfov must lie in (0, pi)");
  }
}

ViewId pair_partner(ViewId view) {
  switch (view) {
    case ViewId::Front: return ViewId::Rear;
    case ViewId::Rear: return ViewId::Front;
    case ViewId::Left: return ViewId::Right;
    case ViewId::Right: return ViewId::Left;
    case ViewId::Top: return ViewId::Bottom;
    case ViewId::Bottom: return ViewId::Top;
  }
  throw ValidationError("invalid ViewId");
}

std::string view_name(ViewId view) {
  switch (view) {
    case ViewId::Front: return "front";
    case ViewId::Rear: return "rear";
    case ViewId::Left: return "left";
    case ViewId::Right: return "right";
    case ViewId::Top: return "top";
    case ViewId::Bottom: return "bottom";
  }
  throw ValidationError("invalid ViewId");
}

ViewId parse_view(const std::string& name) {
  for (ViewId v : kAllViews)
    if (view_name(v) == name) return v;
  throw ValidationError("unknown view name: '" + name + "'");
}

Mat3 view_rotation(ViewId view) {
  Mat3 r;
  switch (view) {
    case ViewId::Front:  // identity
      return r;
    case ViewId::Rear:  // R_y(pi)
      r.m = {-1, 0, 0, 0, 1, 0, 0, 0, -1};
      return r;
    case ViewId::Right:  // R_y(pi/2)
      r.m = {0, 0, 1, 0, 1, 0, -1, 0, 0};
      return r;
    case ViewId::Left:  // R_y(-pi/2)
      r.m = {0, 0, -1, 0, 1, 0, 1, 0, 0};
      return r;
    case ViewId::Top:  // R_x(pi/2)
      r.m = {1, 0, 0, 0, 0, -1, 0, 1, 0};
      return r;
    case ViewId::Bottom:  // R_x(-pi/2)
      r.m = {1, 0, 0, 0, 0, 1, 0, -1, 0};
      return r;
  }
  throw ValidationError("invalid ViewId");
}

namespace {

Vec3 view_translation(const Vec3& t, ViewId view) {
  switch (view) {
    case ViewId::Front:
      return t;
    case ViewId::Rear:
      // Only the X component mirrors; t_z stays as-is.
      return {-t.x, t.y, t.z};
    case ViewId::Right:
      return {0.0, t.y, -t.x};
    case ViewId::Left:
      return {0.0, t.y, t.x};
    case ViewId::Top:
      return {t.x, 0.0, t.y};
    case ViewId::Bottom:
      return {t.x, 0.0, -t.y};
  }
  throw ValidationError("invalid ViewId");
}

}  // namespace

std::pair<HandMesh, CameraPose> transform_to_view(const HandMesh& mesh,
                                                  const CameraPose& camera,
                                                  ViewId view) {
  validate_mesh(mesh);
  validate_camera(camera);
  if (view == ViewId::Front) return {mesh, camera};

  const Mat3 r = view_rotation(view);
  HandMesh out = mesh;
  for (Vec3& v : out.vertices) v = r * v;
  if (out.keypoints)
    for (Vec3& k : *out.keypoints) k = r * k;

  CameraPose cam = camera;
  cam.translation = view_translation(camera.translation, view);
  return {std::move(out), cam};
}

}  // namespace mufen
