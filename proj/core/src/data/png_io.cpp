#include "casgen/data/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace casgen::data {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageTensor& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("encode_png: only 1 or 3 channels supported");
  const int h = img.height, w = img.width, c = img.channels;

  // Filter 0 scanlines, CHW -> interleaved.
  std::vector<std::uint8_t> raw(static_cast<size_t>(h) * (static_cast<size_t>(w) * c + 1));
  size_t idx = 0;
  for (int y = 0; y < h; ++y) {
    raw[idx++] = 0;
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        double v = std::round(img.at(ch, y, x));
        if (v < 0 || v > 255) throw std::invalid_argument("encode_png: value outside [0,255]");
        raw[idx++] = static_cast<std::uint8_t>(v);
      }
    }
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("encode_png: deflate failed");
  comp.resize(comp_size);

  std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                                           // bit depth
  ihdr.push_back(c == 3 ? 2 : 0);                              // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", comp);
  append_chunk(out, "IEND", {});
  return out;
}

ImageTensor decode_png(const std::uint8_t* data, size_t size) {
  if (size < 8 || std::memcmp(data, "\x89PNG\r\n\x1a\n", 8) != 0)
    throw std::runtime_error("decode_png: not a PNG");
  size_t pos = 8;
  int w = 0, h = 0, c = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= size) {
    const std::uint32_t len = get_u32(data + pos);
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const std::uint8_t* payload = data + pos + 8;
    if (pos + 12 + len > size) throw std::runtime_error("decode_png: truncated chunk");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = static_cast<int>(get_u32(payload));
      h = static_cast<int>(get_u32(payload + 4));
      if (payload[8] != 8) throw std::runtime_error("decode_png: unsupported bit depth");
      if (payload[9] == 2) c = 3;
      else if (payload[9] == 0) c = 1;
      else throw std::runtime_error("decode_png: unsupported color type");
      if (payload[12] != 0) throw std::runtime_error("decode_png: interlacing unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || c == 0 || idat.empty()) throw std::runtime_error("decode_png: malformed");

  const size_t stride = static_cast<size_t>(w) * c;
  std::vector<std::uint8_t> raw(static_cast<size_t>(h) * (stride + 1));
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size())
    throw std::runtime_error("decode_png: inflate failed");

  // Undo scanline filters in place.
  std::vector<std::uint8_t> prev(stride, 0);
  ImageTensor img(h, w, c);
  std::vector<std::uint8_t> cur(stride);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.data() + static_cast<size_t>(y) * (stride + 1);
    const int filter = row[0];
    for (size_t i = 0; i < stride; ++i) {
      const int x = row[1 + i];
      const int a = i >= static_cast<size_t>(c) ? cur[i - c] : 0;
      const int b = prev[i];
      const int cc = i >= static_cast<size_t>(c) ? prev[i - c] : 0;
      int v;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + paeth(a, b, cc); break;
        default: throw std::runtime_error("decode_png: bad filter");
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) img.at(ch, y, x) = cur[static_cast<size_t>(x) * c + ch];
    prev = cur;
  }
  return img;
}

void write_png(const std::string& path, const ImageTensor& img) {
  auto bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

ImageTensor read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_png: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes.data(), bytes.size());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + ": " + path);
  }
}

}  // namespace casgen::data
