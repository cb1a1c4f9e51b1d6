#include "mufen/image_io.hpp"

#include <cmath>
#include <fstream>

namespace mufen {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
      break;
    }
  }
  return tok;
}

}  // namespace

void write_ppm(int width, int height, const std::vector<std::uint8_t>& rgb,
               const std::string& path) {
  require(rgb.size() == static_cast<std::size_t>(width) * height * 3,
          "rgb buffer size does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw ParseError("write failed: " + path);
}

void write_ppm(const Framebuffer& fb, const std::string& path) {
  write_ppm(fb.width, fb.height, fb.rgb, path);
}

std::vector<std::uint8_t> read_ppm(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PPM file: " + path);
  if (next_token(in) != "P6") throw ParseError("not a binary PPM (P6): " + path);
  width = std::stoi(next_token(in));
  height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (width <= 0 || height <= 0 || maxval != 255)
    throw ParseError("unsupported PPM header in " + path);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size()))
    throw ParseError("truncated PPM payload in " + path);
  return rgb;
}

void write_pgm16(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<std::uint8_t> bytes;
  bytes.reserve(img.pixels.size() * 2);
  for (double d : img.pixels) {
    const double clamped = d < 0.0 ? 0.0 : (d > 1.0 ? 1.0 : d);
    const auto v = static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));  // big-endian
    bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError("write failed: " + path);
}

GrayImage read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PGM file: " + path);
  if (next_token(in) != "P5") throw ParseError("not a binary PGM (P5): " + path);
  GrayImage img;
  img.width = std::stoi(next_token(in));
  img.height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (img.width <= 0 || img.height <= 0 || maxval != 65535)
    throw ParseError("unsupported PGM header in " + path);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<std::uint8_t> bytes(n * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw ParseError("truncated PGM payload in " + path);
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v =
        static_cast<std::uint16_t>((bytes[i * 2] << 8) | bytes[i * 2 + 1]);
    img.pixels[i] = static_cast<double>(v) / 65535.0;
  }
  return img;
}

}  // namespace mufen
