#pragma once

#include <array>
#include <cstdint>

#include "mufen/geometry.hpp"

namespace mufen {

// Procedural stand-in for scanned hand meshes: a palm box plus five fingers
// built from capsule segments, with the 21-keypoint joint chain (wrist, then
// four joints per finger, thumb first, tip last).
//
// `curls` holds one flexion parameter in [0,1] per finger (thumb..pinky);
// 0 is fully extended in the palm plane, 1 a closed fist. The seed drives
// small dimension jitter, so equal (seed, curls, handedness) inputs return
// bit-identical meshes. The result is centered on its vertex centroid and
// fits inside a 0.15 m bounding radius. Every connected component is a
// closed, outward-oriented manifold.
HandMesh synth_hand(std::uint64_t seed, const std::array<double, 5>& curls,
                    Handedness handedness = Handedness::Right);

}  // namespace mufen
