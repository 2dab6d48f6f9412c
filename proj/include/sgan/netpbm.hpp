#pragma once
// Binary netpbm I/O: P6 (color, used for dataset images) and P5 (gray, used
// for saliency maps and label masks). Only maxval 255 is accepted. Parse
// errors carry the file path and the byte offset where parsing stopped.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sgan/tensor.hpp"

namespace sgan {

struct GrayImage {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // row-major, height*width

  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
};

struct RgbImage {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // row-major, interleaved rgb, height*width*3

  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

namespace detail {

[[noreturn]] inline void pnm_fail(const std::string& path, size_t offset,
                                  const std::string& what) {
  throw std::runtime_error(path + ": " + what + " at byte " + std::to_string(offset));
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

// Whitespace and '#'-comment skipping between header tokens.
inline void pnm_skip_space(const std::vector<uint8_t>& b, size_t& off) {
  while (off < b.size()) {
    uint8_t c = b[off];
    if (c == '#') {
      while (off < b.size() && b[off] != '\n') ++off;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++off;
    } else {
      return;
    }
  }
}

inline int pnm_read_int(const std::string& path, const std::vector<uint8_t>& b,
                        size_t& off, const char* field) {
  pnm_skip_space(b, off);
  if (off >= b.size() || b[off] < '0' || b[off] > '9')
    pnm_fail(path, off, std::string("expected ") + field);
  long v = 0;
  while (off < b.size() && b[off] >= '0' && b[off] <= '9') {
    v = v * 10 + (b[off] - '0');
    if (v > 1 << 20) pnm_fail(path, off, std::string(field) + " out of range");
    ++off;
  }
  return static_cast<int>(v);
}

inline void pnm_read_header(const std::string& path, const std::vector<uint8_t>& b,
                            const char* magic, size_t& off, int& w, int& h) {
  if (b.size() < 2 || b[0] != static_cast<uint8_t>(magic[0]) ||
      b[1] != static_cast<uint8_t>(magic[1])) {
    std::string found = b.size() >= 2
                            ? std::string(1, static_cast<char>(b[0])) + static_cast<char>(b[1])
                            : std::string("<eof>");
    pnm_fail(path, 0, std::string("expected magic '") + magic + "', found '" + found + "'");
  }
  off = 2;
  w = pnm_read_int(path, b, off, "width");
  h = pnm_read_int(path, b, off, "height");
  if (w <= 0 || h <= 0) pnm_fail(path, off, "dimensions must be positive");
  size_t maxval_off = off;
  int maxval = pnm_read_int(path, b, off, "maxval");
  if (maxval != 255)
    pnm_fail(path, maxval_off, "maxval must be 255, got " + std::to_string(maxval));
  if (off >= b.size()) pnm_fail(path, off, "missing pixel data");
  uint8_t sep = b[off];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    pnm_fail(path, off, "expected single whitespace after maxval");
  ++off;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
  auto bytes = detail::read_file_bytes(path);
  size_t off = 0;
  GrayImage img;
  detail::pnm_read_header(path, bytes, "P5", off, img.width, img.height);
  const size_t need = static_cast<size_t>(img.width) * img.height;
  if (bytes.size() - off < need)
    detail::pnm_fail(path, off,
                     "truncated pixel data, need " + std::to_string(need) +
                         " bytes, have " + std::to_string(bytes.size() - off));
  img.pixels.assign(bytes.begin() + off, bytes.begin() + off + need);
  return img;
}

inline RgbImage read_ppm(const std::string& path) {
  auto bytes = detail::read_file_bytes(path);
  size_t off = 0;
  RgbImage img;
  detail::pnm_read_header(path, bytes, "P6", off, img.width, img.height);
  const size_t need = static_cast<size_t>(img.width) * img.height * 3;
  if (bytes.size() - off < need)
    detail::pnm_fail(path, off,
                     "truncated pixel data, need " + std::to_string(need) +
                         " bytes, have " + std::to_string(bytes.size() - off));
  img.pixels.assign(bytes.begin() + off, bytes.begin() + off + need);
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  require(img.width > 0 && img.height > 0, "write_pgm: empty image");
  require(img.pixels.size() == static_cast<size_t>(img.width) * img.height,
          "write_pgm: pixel buffer size does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
  require(img.width > 0 && img.height > 0, "write_ppm: empty image");
  require(img.pixels.size() == static_cast<size_t>(img.width) * img.height * 3,
          "write_ppm: pixel buffer size does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace sgan
