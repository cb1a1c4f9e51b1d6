#include "mufen/viewselect.hpp"

#include <algorithm>

namespace mufen {

std::string pair_name(PairId id) {
  switch (id) {
    case PairId::FrontRear: return "FrontRear";
    case PairId::LeftRight: return "LeftRight";
    case PairId::TopBottom: return "TopBottom";
  }
  throw ValidationError("invalid PairId");
}

PairId parse_pair(const std::string& name) {
  for (PairId p : kAllPairs)
    if (pair_name(p) == name) return p;
  throw ValidationError("unknown pair name: '" + name + "'");
}

std::pair<ViewId, ViewId> pair_views(PairId id) {
  switch (id) {
    case PairId::FrontRear: return {ViewId::Front, ViewId::Rear};
    case PairId::LeftRight: return {ViewId::Left, ViewId::Right};
    case PairId::TopBottom: return {ViewId::Top, ViewId::Bottom};
  }
  throw ValidationError("invalid PairId");
}

std::array<ViewPair, 3> score_pairs(const HandMesh& mesh, const CameraPose& camera,
                                    int width, int height) {
  std::array<ViewPair, 3> pairs;
  for (std::size_t i = 0; i < 3; ++i) {
    const PairId id = kAllPairs[i];
    const auto [a, b] = pair_views(id);
    ViewPair& p = pairs[i];
    p.id = id;
    p.first = a;
    p.second = b;
    p.area_first = silhouette_area(mesh, a, camera, width, height);
    p.area_second = silhouette_area(mesh, b, camera, width, height);
    p.score = p.area_first + p.area_second;
  }
  return pairs;
}

ViewPair select_pair(const std::vector<ViewPair>& pairs, bool single_view_max) {
  require(pairs.size() == 3, "select_pair expects exactly 3 view pairs, got " +
                                 std::to_string(pairs.size()));
  std::size_t best = 0;
  auto key = [&](const ViewPair& p) {
    return single_view_max ? std::max(p.area_first, p.area_second) : p.score;
  };
  for (std::size_t i = 1; i < pairs.size(); ++i)
    if (key(pairs[i]) > key(pairs[best])) best = i;  // strict: ties keep fixed order
  return pairs[best];
}

ViewPair select_pair(const std::array<ViewPair, 3>& pairs, bool single_view_max) {
  return select_pair(std::vector<ViewPair>(pairs.begin(), pairs.end()), single_view_max);
}

std::array<double, 4> silhouette_bbox(const Framebuffer& fb) {
  int min_x = fb.width, max_x = -1, min_y = fb.height, max_y = -1;
  for (int y = 0; y < fb.height; ++y)
    for (int x = 0; x < fb.width; ++x)
      if (fb.covered(x, y)) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  if (max_x < 0) throw EmptySilhouetteError("no covered pixels in silhouette");
  return {static_cast<double>(min_x) / fb.width, static_cast<double>(min_y) / fb.height,
          static_cast<double>(max_x + 1) / fb.width,
          static_cast<double>(max_y + 1) / fb.height};
}

PriorBundle emit_pair_renders(const HandMesh& mesh, const CameraPose& camera,
                              const ViewPair& pair, int width, int height) {
  PriorBundle bundle;
  bundle.rgb_a = render_view(mesh, camera, pair.first, width, height);
  bundle.rgb_b = render_view(mesh, camera, pair.second, width, height);

  const HandMesh centered = centered_on_centroid(mesh);
  const Framebuffer front = rasterize(centered, camera, width, height);
  bundle.depth_front = normalize_depth(front);
  bundle.bbox = silhouette_bbox(front);
  return bundle;
}

}  // namespace mufen
