#include "mufen/tensor_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mufen {

namespace {

constexpr char kMagic[4] = {'M', 'U', 'F', 'T'};

template <class T>
void write_le(std::ofstream& out, T v) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::ifstream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void save_muft(const Tensor& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_le<std::uint64_t>(out, d);
  for (double v : t.values()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_le<std::uint32_t>(out, bits);
  }
  if (!out) throw ParseError("write failed: " + path);
}

Tensor load_muft(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open MUFT file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad MUFT magic in " + path);
  const auto rank = read_le<std::uint32_t>(in);
  if (rank > 8) throw ParseError("implausible MUFT rank in " + path);
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(read_le<std::uint64_t>(in));
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = read_le<std::uint32_t>(in);
    if (!in) throw ParseError("truncated MUFT payload in " + path);
    float f;
    std::memcpy(&f, &bits, 4);
    values[i] = static_cast<double>(f);
  }
  return Tensor::from_data(shape, std::move(values), false, Dtype::f32);
}

void save_checkpoint(const std::map<std::string, Tensor>& params,
                     const std::string& index_path) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(index_path).parent_path();
  nlohmann::ordered_json index;
  for (const auto& [name, tensor] : params) {
    std::string file = name + ".muft";
    for (char& c : file)
      if (c == '/' || c == '\\') c = '_';
    save_muft(tensor, (dir / file).string());
    index[name] = file;
  }
  std::ofstream out(index_path);
  if (!out) throw ParseError("cannot open file for writing: " + index_path);
  out << index.dump(2) << '\n';
}

std::map<std::string, Tensor> load_checkpoint(const std::string& index_path) {
  namespace fs = std::filesystem;
  std::ifstream in(index_path);
  if (!in) throw ParseError("cannot open checkpoint index: " + index_path);
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid checkpoint index: " + std::string(e.what()));
  }
  const fs::path dir = fs::path(index_path).parent_path();
  std::map<std::string, Tensor> params;
  for (const auto& [name, file] : index.items())
    params[name] = load_muft((dir / file.get<std::string>()).string());
  return params;
}

}  // namespace mufen
