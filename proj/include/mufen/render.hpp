#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mufen/geometry.hpp"

namespace mufen {

// Fixed material model: metallic 0 and roughness 1 reduce shading to pure
// Lambertian diffuse. Left/right hands are told apart by a chromatic offset
// added to the base color.
struct Material {
  double base_color[3] = {1.0, 1.0, 0.9};
  double metallic = 0.0;
  double roughness = 1.0;
  double chroma_offset[3] = {0.0, 0.0, 0.0};

  // Right hand: no offset. Left hand: (-0.1, 0, +0.1).
  static Material for_handedness(Handedness handedness);

  // base_color + chroma_offset, clamped to [0,1] per channel.
  void albedo(double out[3]) const;
};

struct DirectionalLight {
  Vec3 to_light;  // unit vector from the surface toward the light
  double intensity[3] = {1.0, 1.0, 1.0};
};

struct PointLight {
  Vec3 position;  // camera space
  double intensity[3] = {1.0, 1.0, 1.0};
};

// Composite rig: ambient + directional + point + the three-light "raymond"
// ring (azimuths 0/120/240 degrees at 45 degrees elevation on the camera
// side, unit intensity each).
struct LightRig {
  double ambient[3] = {0.3, 0.3, 0.3};
  std::vector<DirectionalLight> directional;
  std::vector<PointLight> point;
  std::vector<DirectionalLight> raymond;

  // Ambient (0.3,0.3,0.3); one directional light toward the camera at
  // intensity (0.4,0.4,0.4); one point light at (0,0,2) camera space at
  // (0.5,0.5,0.5); the raymond ring.
  static LightRig default_rig();

  // default_rig plus one compensation light along the viewing axis at
  // intensity (0.2,0.2,0.2), used for the oblique (non front/rear) views.
  static LightRig with_view_compensation();

  void validate() const;
};

// Raster output. `depth` holds camera-space z per pixel with +infinity at
// background; a pixel is covered iff its depth is finite. The geometry pass
// also keeps interpolated unit normals and camera-space positions for
// shading. Pixel (x, y) uses the top-left convention, x right / y down,
// sample points at pixel centers (x+0.5, y+0.5).
struct Framebuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;    // H*W*3, row-major, background (0,0,0)
  std::vector<double> depth;        // H*W
  std::vector<double> normal;       // H*W*3
  std::vector<double> position;     // H*W*3, camera space

  static constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

  bool covered(int x, int y) const {
    return std::isfinite(depth[static_cast<std::size_t>(y) * width + x]);
  }
  std::size_t covered_count() const;
};

// Geometry pass: z-buffered triangle rasterization producing depth, smooth
// (area-weighted vertex) normals and positions. Output is bit-identical for
// any `threads` value (each worker owns disjoint row bands and scans
// triangles in the same order); threads = 0 picks a default. Under a
// perspective camera, triangles touching z <= 0 are skipped; weak
// perspective projects regardless of z sign. An empty mesh yields an
// all-background framebuffer.
Framebuffer rasterize(const HandMesh& mesh, const CameraPose& camera, int width,
                      int height, int threads = 1);

// Fills rgb: per covered pixel
//   albedo * clamp01(ambient + sum_lights intensity * max(0, n.l))
// quantized as round(v * 255). Background pixels stay (0,0,0).
void shade(Framebuffer& geom, const LightRig& lights, const Material& material);

// Grayscale image with values in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // H*W

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Depth map normalized over the covered range: (far - z) / (far - near),
// so the nearest covered pixel reads 1 and the farthest 0; background is 0.
// A constant-depth surface maps to 1 everywhere.
GrayImage render_depth(const HandMesh& mesh, const CameraPose& camera, int width,
                       int height);
GrayImage normalize_depth(const Framebuffer& fb);

// Fraction of pixels covered by the mesh silhouette in the given view
// (mesh is centered on its centroid, then transformed to the view).
// Requires a weak-perspective camera.
double silhouette_area(const HandMesh& mesh, ViewId view, const CameraPose& camera,
                       int width, int height);

// Full single-view render: center, transform, rasterize, shade. Oblique
// views (left/right/top/bottom) get the compensation light.
Framebuffer render_view(const HandMesh& mesh, const CameraPose& camera, ViewId view,
                        int width, int height, int threads = 1);

}  // namespace mufen
