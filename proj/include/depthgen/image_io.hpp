#pragma once

#include <filesystem>

#include "depthgen/tensor.hpp"

namespace depthgen {

/// Grayscale PFM ("Pf"), 32-bit little-endian floats, rows bottom-to-top,
/// scale header -1.0. Accepts [H, W] or [1, H, W]; values pass through a
/// float32 cast, so float-representable inputs roundtrip bit-exact.
void write_pfm(const std::filesystem::path& path, const Tensor& img);
Tensor read_pfm(const std::filesystem::path& path);  // -> [1, H, W]

/// Binary PPM (P6, maxval 255). Expects [3, H, W] with values in [0, 255];
/// writing rounds to the nearest byte.
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);
Tensor read_ppm(const std::filesystem::path& path);  // -> [3, H, W]

/// Binary PGM (P5) for label maps. Expects [1, H, W] or [H, W] holding
/// integers in [0, maxval], maxval <= 255.
void write_pgm(const std::filesystem::path& path, const Tensor& gray,
               unsigned maxval);
Tensor read_pgm(const std::filesystem::path& path, unsigned* maxval = nullptr);

}  // namespace depthgen
