#pragma once

#include <array>
#include <string>
#include <vector>

#include "mufen/render.hpp"

namespace mufen {

enum class PairId : std::uint8_t { FrontRear, LeftRight, TopBottom };

inline constexpr std::array<PairId, 3> kAllPairs = {PairId::FrontRear, PairId::LeftRight,
                                                    PairId::TopBottom};

std::string pair_name(PairId id);
PairId parse_pair(const std::string& name);
std::pair<ViewId, ViewId> pair_views(PairId id);

// One complementary view pair scored by the sum of its two silhouette
// covered fractions.
struct ViewPair {
  PairId id = PairId::FrontRear;
  ViewId first = ViewId::Front;
  ViewId second = ViewId::Rear;
  double area_first = 0.0;
  double area_second = 0.0;
  double score = 0.0;  // area_first + area_second
};

// Scores the three complementary pairs in fixed order (FrontRear, LeftRight,
// TopBottom) via silhouette_area of each member view.
std::array<ViewPair, 3> score_pairs(const HandMesh& mesh, const CameraPose& camera,
                                    int width, int height);

// Argmax by combined score; ties resolve to the earliest pair in the fixed
// order. With `single_view_max` the pair containing the single
// largest-area view wins instead (same tie-break).
ViewPair select_pair(const std::array<ViewPair, 3>& pairs, bool single_view_max = false);
ViewPair select_pair(const std::vector<ViewPair>& pairs, bool single_view_max = false);

// Training prior for one sample: the selected pair's two shaded renders,
// the front-view depth map, and the front silhouette bounding box in
// normalized [0,1] image coordinates (x0,y0,x1,y1; half-open pixel extents).
struct PriorBundle {
  Framebuffer rgb_a;
  Framebuffer rgb_b;
  GrayImage depth_front;
  std::array<double, 4> bbox{0, 0, 0, 0};
};

// Normalized bounding box of the covered pixels. Throws EmptySilhouetteError
// when nothing is covered.
std::array<double, 4> silhouette_bbox(const Framebuffer& fb);

PriorBundle emit_pair_renders(const HandMesh& mesh, const CameraPose& camera,
                              const ViewPair& pair, int width, int height);

}  // namespace mufen
