#pragma once

#include <string>

#include "mufen/geometry.hpp"

namespace mufen {

// Loads a Wavefront OBJ subset: `v` and `f` lines. Polygons with more than
// three vertices are fan-triangulated; `vt`/`vn` references and all other
// line types are ignored. Indices are 1-based; 0, negative and out-of-range
// indices are rejected with the offending line number.
HandMesh load_obj(const std::string& path);

// Writes vertices and triangle faces. Round-trips through load_obj with
// identical topology and vertices within 1e-6 (full precision is written).
void save_obj(const HandMesh& mesh, const std::string& path);

// JSON camera descriptor:
//   {"translation":[tx,ty,tz],
//    "projection":{"type":"weak_perspective","scale":s}}  or
//    "projection":{"type":"perspective","yfov":r}}
CameraPose load_camera_json(const std::string& path);
void save_camera_json(const CameraPose& camera, const std::string& path);

}  // namespace mufen
