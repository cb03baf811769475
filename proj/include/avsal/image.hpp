#ifndef AVSAL_IMAGE_HPP
#define AVSAL_IMAGE_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>

#include "avsal/tensor.hpp"

namespace avsal {

// Min-max scaled 8-bit grayscale PGM (binary P5). A constant map writes as
// mid-gray rather than dividing by zero.
template <typename S>
void write_pgm(const std::string& path, const Tensor<S>& map) {
  if (map.rank() != 2) throw ShapeError(cat("write_pgm: rank-2 map required, got ", shape_str(map.shape())));
  const int H = map.dim(0), W = map.dim(1);
  const double lo = static_cast<double>(map.min()), hi = static_cast<double>(map.max());
  const double span = hi - lo;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(cat("cannot write ", path));
  out << "P5\n" << W << " " << H << "\n255\n";
  for (std::int64_t i = 0; i < map.numel(); ++i) {
    const double v = span > 0 ? (static_cast<double>(map[i]) - lo) / span : 0.5;
    const unsigned char byte = static_cast<unsigned char>(std::clamp(v * 255.0 + 0.5, 0.0, 255.0));
    out.write(reinterpret_cast<const char*>(&byte), 1);
  }
  if (!out) throw IoError(cat("failed writing ", path));
}

// Raw float map with the same "H W" text header used by the dataset files.
template <typename S>
void write_float_map(const std::string& path, const Tensor<S>& map) {
  if (map.rank() != 2) throw ShapeError(cat("write_float_map: rank-2 map required, got ", shape_str(map.shape())));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(cat("cannot write ", path));
  out << map.dim(0) << " " << map.dim(1) << "\n";
  for (std::int64_t i = 0; i < map.numel(); ++i) {
    const float f = static_cast<float>(map[i]);
    out.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
  if (!out) throw IoError(cat("failed writing ", path));
}

}  // namespace avsal

#endif  // AVSAL_IMAGE_HPP
