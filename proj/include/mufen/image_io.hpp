#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mufen/render.hpp"

namespace mufen {

// Binary PPM (P6, maxval 255) for RGB output.
void write_ppm(const Framebuffer& fb, const std::string& path);
void write_ppm(int width, int height, const std::vector<std::uint8_t>& rgb,
               const std::string& path);
// Returns rgb bytes; width/height via out-params.
std::vector<std::uint8_t> read_ppm(const std::string& path, int& width, int& height);

// Binary PGM (P5, maxval 65535, big-endian samples per the Netpbm spec).
// Values are quantized as round(d * 65535).
void write_pgm16(const GrayImage& img, const std::string& path);
GrayImage read_pgm16(const std::string& path);

}  // namespace mufen
