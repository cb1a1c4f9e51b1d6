#include "mufen/obj_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mufen {

namespace {

// Parses the vertex-position index out of an `f` token ("7", "7/1", "7//2",
// "7/1/2"), 1-based as written in the file.
int parse_face_index(const std::string& token, int line_no, int vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size())
    throw ParseError("malformed face index '" + token + "'", line_no);
  if (idx == 0) throw ParseError("face index 0 (OBJ indices are 1-based)", line_no);
  if (idx < 0) throw ParseError("negative face indices are not supported", line_no);
  if (idx > vertex_count)
    throw ParseError("face index " + std::to_string(idx) + " exceeds vertex count " +
                         std::to_string(vertex_count),
                     line_no);
  return idx - 1;
}

}  // namespace

HandMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open OBJ file: " + path);

  HandMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z))
        throw ParseError("malformed vertex line", line_no);
      if (!v.finite()) throw ParseError("non-finite vertex coordinate", line_no);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token)
        poly.push_back(parse_face_index(token, line_no,
                                        static_cast<int>(mesh.vertices.size())));
      if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", line_no);
      for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
    // vn/vt/o/g/s/usemtl/mtllib and anything unknown: ignored.
  }
  validate_mesh(mesh);
  return mesh;
}

void save_obj(const HandMesh& mesh, const std::string& path) {
  validate_mesh(mesh);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  char buf[160];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw ParseError("write failed: " + path);
}

CameraPose load_camera_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open camera file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid camera JSON: " + std::string(e.what()));
  }
  CameraPose cam;
  try {
    const auto& t = j.at("translation");
    cam.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    const auto& p = j.at("projection");
    const std::string type = p.at("type").get<std::string>();
    if (type == "weak_perspective")
      cam.projection = WeakPerspective{p.at("scale").get<double>()};
    else if (type == "perspective")
      cam.projection = Perspective{p.at("yfov").get<double>()};
    else
      throw ParseError("unknown projection type: '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid camera descriptor: " + std::string(e.what()));
  }
  validate_camera(cam);
  return cam;
}

void save_camera_json(const CameraPose& camera, const std::string& path) {
  validate_camera(camera);
  nlohmann::ordered_json j;
  j["translation"] = {camera.translation.x, camera.translation.y, camera.translation.z};
  if (const auto* wp = std::get_if<WeakPerspective>(&camera.projection))
    j["projection"] = {{"type", "weak_perspective"}, {"scale", wp->scale}};
  else
    j["projection"] = {{"type", "perspective"},
                       {"yfov", std::get<Perspective>(camera.projection).yfov}};
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace mufen
