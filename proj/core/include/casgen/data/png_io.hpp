#pragma once

#include "casgen/data/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace casgen::data {

/// Writes an 8-bit lossless PNG (RGB or grayscale). Values must lie in
/// [0,255]; they are rounded to the nearest integer.
void write_png(const std::string& path, const ImageTensor& img);

/// Reads an 8-bit PNG written by write_png (filters 0-4 handled).
ImageTensor read_png(const std::string& path);

std::vector<std::uint8_t> encode_png(const ImageTensor& img);
ImageTensor decode_png(const std::uint8_t* data, size_t size);

}  // namespace casgen::data
