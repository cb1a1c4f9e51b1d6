#include "mufen/render.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace mufen {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ScreenVertex {
  double x, y;   // pixel coordinates
  double z;      // camera-space depth
  Vec3 cam_pos;  // camera-space position
  Vec3 normal;   // smooth vertex normal (camera space)
};

}  // namespace

Material Material::for_handedness(Handedness handedness) {
  Material m;
  if (handedness == Handedness::Left) {
    m.chroma_offset[0] = -0.1;
    m.chroma_offset[2] = 0.1;
  }
  return m;
}

void Material::albedo(double out[3]) const {
  for (int c = 0; c < 3; ++c)
    out[c] = std::clamp(base_color[c] + chroma_offset[c], 0.0, 1.0);
}

LightRig LightRig::default_rig() {
  LightRig rig;
  rig.directional.push_back({Vec3{0.0, 0.0, -1.0}, {0.4, 0.4, 0.4}});
  rig.point.push_back({Vec3{0.0, 0.0, 2.0}, {0.5, 0.5, 0.5}});
  const double elev = kPi / 4.0;
  for (int k = 0; k < 3; ++k) {
    const double az = 2.0 * kPi * k / 3.0;
    const Vec3 dir = Vec3{std::sin(az) * std::cos(elev), std::sin(elev),
                          -std::cos(az) * std::cos(elev)}
                         .normalized();
    rig.raymond.push_back({dir, {1.0, 1.0, 1.0}});
  }
  return rig;
}

LightRig LightRig::with_view_compensation() {
  LightRig rig = default_rig();
  rig.directional.push_back({Vec3{0.0, 0.0, -1.0}, {0.2, 0.2, 0.2}});
  return rig;
}

void LightRig::validate() const {
  auto check = [](const DirectionalLight& l) {
    require(std::abs(l.to_light.norm() - 1.0) < 1e-9, "light direction must be unit length");
    for (double v : l.intensity) require(v >= 0.0, "light intensity must be non-negative");
  };
  for (const auto& l : directional) check(l);
  for (const auto& l : raymond) check(l);
  for (const auto& l : point)
    for (double v : l.intensity) require(v >= 0.0, "light intensity must be non-negative");
  for (double v : ambient) require(v >= 0.0, "ambient intensity must be non-negative");
}

std::size_t Framebuffer::covered_count() const {
  std::size_t n = 0;
  for (double d : depth)
    if (std::isfinite(d)) ++n;
  return n;
}

namespace {

std::vector<Vec3> smooth_vertex_normals(const HandMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3{0, 0, 0});
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    const Vec3 n = (b - a).cross(c - a);  // area-weighted
    for (int i : f) normals[static_cast<std::size_t>(i)] = normals[static_cast<std::size_t>(i)] + n;
  }
  for (Vec3& n : normals) n = n.normalized();
  return normals;
}

// Rasterizes all triangles into rows [row_begin, row_end). Keeping whole rows
// in one worker makes the result independent of the worker count.
void raster_rows(const std::vector<ScreenVertex>& verts,
                 const std::vector<std::array<int, 3>>& faces, bool cull_behind,
                 Framebuffer& fb, int row_begin, int row_end) {
  const int w = fb.width;
  for (const auto& face : faces) {
    const ScreenVertex& v0 = verts[static_cast<std::size_t>(face[0])];
    const ScreenVertex& v1 = verts[static_cast<std::size_t>(face[1])];
    const ScreenVertex& v2 = verts[static_cast<std::size_t>(face[2])];
    if (cull_behind && (v0.z <= 1e-9 || v1.z <= 1e-9 || v2.z <= 1e-9)) continue;

    const double area = (v1.x - v0.x) * (v2.y - v0.y) - (v2.x - v0.x) * (v1.y - v0.y);
    if (area == 0.0) continue;

    int min_x = static_cast<int>(std::floor(std::min({v0.x, v1.x, v2.x}) - 0.5));
    int max_x = static_cast<int>(std::ceil(std::max({v0.x, v1.x, v2.x}) + 0.5));
    int min_y = static_cast<int>(std::floor(std::min({v0.y, v1.y, v2.y}) - 0.5));
    int max_y = static_cast<int>(std::ceil(std::max({v0.y, v1.y, v2.y}) + 0.5));
    min_x = std::max(min_x, 0);
    max_x = std::min(max_x, w - 1);
    min_y = std::max(min_y, row_begin);
    max_y = std::min(max_y, row_end - 1);
    if (min_x > max_x || min_y > max_y) continue;

    // Signed edge functions, normalized to a CCW triangle.
    const double sign = area > 0.0 ? 1.0 : -1.0;
    for (int py = min_y; py <= max_y; ++py) {
      const double sy = py + 0.5;
      for (int px = min_x; px <= max_x; ++px) {
        const double sx = px + 0.5;
        const double w0 = sign * ((v1.x - v0.x) * (sy - v0.y) - (sx - v0.x) * (v1.y - v0.y));
        const double w1 = sign * ((v2.x - v1.x) * (sy - v1.y) - (sx - v1.x) * (v2.y - v1.y));
        const double w2 = sign * ((v0.x - v2.x) * (sy - v2.y) - (sx - v2.x) * (v0.y - v2.y));
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

        const double denom = w0 + w1 + w2;
        if (denom <= 0.0) continue;
        const double b0 = w1 / denom;  // barycentric weight of v0
        const double b1 = w2 / denom;
        const double b2 = w0 / denom;
        const double z = b0 * v0.z + b1 * v1.z + b2 * v2.z;

        const std::size_t idx = static_cast<std::size_t>(py) * w + px;
        if (z >= fb.depth[idx]) continue;
        fb.depth[idx] = z;
        for (int c = 0; c < 3; ++c) {
          const double* n0 = &v0.normal.x;
          const double* n1 = &v1.normal.x;
          const double* n2 = &v2.normal.x;
          const double* p0 = &v0.cam_pos.x;
          const double* p1 = &v1.cam_pos.x;
          const double* p2 = &v2.cam_pos.x;
          fb.normal[idx * 3 + c] = b0 * n0[c] + b1 * n1[c] + b2 * n2[c];
          fb.position[idx * 3 + c] = b0 * p0[c] + b1 * p1[c] + b2 * p2[c];
        }
      }
    }
  }
}

}  // namespace

Framebuffer rasterize(const HandMesh& mesh, const CameraPose& camera, int width,
                      int height, int threads) {
  require(width >= 8 && height >= 8, "render resolution must be at least 8x8");
  validate_mesh(mesh);
  validate_camera(camera);

  Framebuffer fb;
  fb.width = width;
  fb.height = height;
  fb.rgb.assign(static_cast<std::size_t>(width) * height * 3, 0);
  fb.depth.assign(static_cast<std::size_t>(width) * height, Framebuffer::kBackgroundDepth);
  fb.normal.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
  fb.position.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
  if (mesh.faces.empty()) return fb;

  const std::vector<Vec3> normals = smooth_vertex_normals(mesh);
  const bool perspective = std::holds_alternative<Perspective>(camera.projection);

  std::vector<ScreenVertex> verts(mesh.vertices.size());
  const Vec3 t = camera.translation;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 q = mesh.vertices[i] + t;  // camera space
    double x_ndc, y_ndc;
    if (perspective) {
      const double f = 1.0 / std::tan(std::get<Perspective>(camera.projection).yfov / 2.0);
      const double aspect = static_cast<double>(width) / height;
      const double zz = q.z > 1e-12 ? q.z : 1e-12;
      x_ndc = f / aspect * q.x / zz;
      y_ndc = f * q.y / zz;
    } else {
      const double s = std::get<WeakPerspective>(camera.projection).scale;
      x_ndc = s * q.x;
      y_ndc = s * q.y;
    }
    verts[i].x = (x_ndc * 0.5 + 0.5) * width;
    verts[i].y = (0.5 - y_ndc * 0.5) * height;  // +y up maps to rows growing down
    verts[i].z = q.z;
    verts[i].cam_pos = q;
    verts[i].normal = normals[i];
  }

  if (threads <= 0)
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, height);
  if (threads == 1) {
    raster_rows(verts, mesh.faces, perspective, fb, 0, height);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const int rows_per = (height + threads - 1) / threads;
    for (int k = 0; k < threads; ++k) {
      const int begin = k * rows_per;
      const int end = std::min(height, begin + rows_per);
      if (begin >= end) break;
      pool.emplace_back(raster_rows, std::cref(verts), std::cref(mesh.faces), perspective,
                        std::ref(fb), begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return fb;
}

void shade(Framebuffer& geom, const LightRig& lights, const Material& material) {
  lights.validate();
  require(material.metallic == 0.0, "material metallic factor is fixed at 0");
  require(material.roughness == 1.0, "material roughness is fixed at 1");
  double albedo[3];
  material.albedo(albedo);

  const std::size_t n = static_cast<std::size_t>(geom.width) * geom.height;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(geom.depth[i])) continue;
    Vec3 normal{geom.normal[i * 3], geom.normal[i * 3 + 1], geom.normal[i * 3 + 2]};
    // Two-sided shading: the camera looks along +z, so a visible surface
    // faces -z; flip normals pointing away.
    if (normal.z > 0.0) normal = normal * -1.0;
    const Vec3 pos{geom.position[i * 3], geom.position[i * 3 + 1], geom.position[i * 3 + 2]};

    double light[3] = {lights.ambient[0], lights.ambient[1], lights.ambient[2]};
    auto add_directional = [&](const DirectionalLight& l) {
      const double lambert = std::max(0.0, normal.dot(l.to_light));
      for (int c = 0; c < 3; ++c) light[c] += l.intensity[c] * lambert;
    };
    for (const auto& l : lights.directional) add_directional(l);
    for (const auto& l : lights.raymond) add_directional(l);
    for (const auto& l : lights.point) {
      const double lambert = std::max(0.0, normal.dot((l.position - pos).normalized()));
      for (int c = 0; c < 3; ++c) light[c] += l.intensity[c] * lambert;
    }
    for (int c = 0; c < 3; ++c) {
      // Incident light saturates before the albedo multiply, so saturated
      // white light still shows the material color.
      const double v = albedo[c] * std::clamp(light[c], 0.0, 1.0);
      geom.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
}

GrayImage normalize_depth(const Framebuffer& fb) {
  GrayImage img;
  img.width = fb.width;
  img.height = fb.height;
  img.pixels.assign(fb.depth.size(), 0.0);
  double near = std::numeric_limits<double>::infinity();
  double far = -std::numeric_limits<double>::infinity();
  for (double d : fb.depth) {
    if (!std::isfinite(d)) continue;
    near = std::min(near, d);
    far = std::max(far, d);
  }
  if (!std::isfinite(near)) return img;  // no coverage
  const double range = far - near;
  for (std::size_t i = 0; i < fb.depth.size(); ++i) {
    if (!std::isfinite(fb.depth[i])) continue;
    img.pixels[i] = range > 0.0 ? (far - fb.depth[i]) / range : 1.0;
  }
  return img;
}

GrayImage render_depth(const HandMesh& mesh, const CameraPose& camera, int width,
                       int height) {
  return normalize_depth(rasterize(mesh, camera, width, height));
}

double silhouette_area(const HandMesh& mesh, ViewId view, const CameraPose& camera,
                       int width, int height) {
  if (!std::holds_alternative<WeakPerspective>(camera.projection))
    throw UnsupportedProjectionError(
        "silhouette_area requires a weak_perspective camera");
  const auto [view_mesh, view_cam] = transform_to_view(centered_on_centroid(mesh), camera, view);
  const Framebuffer fb = rasterize(view_mesh, view_cam, width, height);
  return static_cast<double>(fb.covered_count()) /
         (static_cast<double>(width) * static_cast<double>(height));
}

Framebuffer render_view(const HandMesh& mesh, const CameraPose& camera, ViewId view,
                        int width, int height, int threads) {
  const auto [view_mesh, view_cam] = transform_to_view(centered_on_centroid(mesh), camera, view);
  Framebuffer fb = rasterize(view_mesh, view_cam, width, height, threads);
  const bool oblique = view != ViewId::Front && view != ViewId::Rear;
  shade(fb, oblique ? LightRig::with_view_compensation() : LightRig::default_rig(),
        Material::for_handedness(mesh.handedness));
  return fb;
}

}  // namespace mufen
