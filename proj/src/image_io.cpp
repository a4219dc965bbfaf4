#include "depthgen/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthgen {

static_assert(std::endian::native == std::endian::little,
              "raw float I/O assumes a little-endian host");

namespace {

[[noreturn]] void bad_file(const std::filesystem::path& path, const char* what) {
  throw std::runtime_error(path.string() + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) bad_file(path, "cannot open for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) bad_file(path, "cannot open");
  return f;
}

/// Next whitespace-delimited header token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_dim(const std::string& tok, const std::filesystem::path& path) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    bad_file(path, "malformed header dimension");
  const unsigned long v = std::stoul(tok);
  if (v == 0) bad_file(path, "zero image dimension");
  return v;
}

const Tensor& as_plane(const Tensor& img, const char* ctx) {
  const Shape& s = img.shape();
  if (s.size() == 2) return img;
  if (s.size() == 3 && s[0] == 1) return img;
  throw std::invalid_argument(std::string(ctx) + ": expected [H,W] or [1,H,W]");
}

std::uint8_t quantize(double v, unsigned maxval) {
  const double r = std::nearbyint(v);
  if (!(r >= 0.0 && r <= static_cast<double>(maxval)))
    throw std::invalid_argument("pixel value outside [0, maxval]");
  return static_cast<std::uint8_t>(r);
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Tensor& img) {
  const Tensor& p = as_plane(img, "write_pfm");
  const std::size_t h = p.shape()[p.shape().size() - 2];
  const std::size_t w = p.shape()[p.shape().size() - 1];
  std::ofstream f = open_out(path);
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(w);
  for (std::size_t y = h; y-- > 0;) {  // bottom-to-top
    for (std::size_t x = 0; x < w; ++x)
      row[x] = static_cast<float>(p[y * w + x]);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(w * sizeof(float)));
  }
  if (!f) bad_file(path, "write failed");
}

Tensor read_pfm(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  if (next_token(f) != "Pf") bad_file(path, "not a grayscale PFM");
  const std::size_t w = parse_dim(next_token(f), path);
  const std::size_t h = parse_dim(next_token(f), path);
  const double scale = std::stod(next_token(f));
  if (scale >= 0.0) bad_file(path, "big-endian PFM unsupported");
  Tensor out({1, h, w});
  std::vector<float> row(w);
  for (std::size_t y = h; y-- > 0;) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(w * sizeof(float)));
    if (!f) bad_file(path, "truncated payload");
    for (std::size_t x = 0; x < w; ++x) out.data()[y * w + x] = row[x];
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.size() != 3 || s[0] != 3)
    throw std::invalid_argument("write_ppm: expected [3,H,W]");
  const std::size_t h = s[1], w = s[2];
  std::ofstream f = open_out(path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> row(3 * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        row[3 * x + c] = quantize(rgb[(c * h + y) * w + x], 255);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) bad_file(path, "write failed");
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  if (next_token(f) != "P6") bad_file(path, "not a binary PPM");
  const std::size_t w = parse_dim(next_token(f), path);
  const std::size_t h = parse_dim(next_token(f), path);
  if (parse_dim(next_token(f), path) != 255) bad_file(path, "maxval must be 255");
  Tensor out({3, h, w});
  std::vector<std::uint8_t> row(3 * w);
  for (std::size_t y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size()));
    if (!f) bad_file(path, "truncated payload");
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.data()[(c * h + y) * w + x] = row[3 * x + c];
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray,
               unsigned maxval) {
  if (maxval == 0 || maxval > 255)
    throw std::invalid_argument("write_pgm: maxval must be in [1, 255]");
  const Tensor& p = as_plane(gray, "write_pgm");
  const std::size_t h = p.shape()[p.shape().size() - 2];
  const std::size_t w = p.shape()[p.shape().size() - 1];
  std::ofstream f = open_out(path);
  f << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  std::vector<std::uint8_t> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) row[x] = quantize(p[y * w + x], maxval);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  if (!f) bad_file(path, "write failed");
}

Tensor read_pgm(const std::filesystem::path& path, unsigned* maxval) {
  std::ifstream f = open_in(path);
  if (next_token(f) != "P5") bad_file(path, "not a binary PGM");
  const std::size_t w = parse_dim(next_token(f), path);
  const std::size_t h = parse_dim(next_token(f), path);
  const std::size_t mv = parse_dim(next_token(f), path);
  if (mv > 255) bad_file(path, "maxval above 255 unsupported");
  if (maxval) *maxval = static_cast<unsigned>(mv);
  Tensor out({1, h, w});
  std::vector<std::uint8_t> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size()));
    if (!f) bad_file(path, "truncated payload");
    for (std::size_t x = 0; x < w; ++x) out.data()[y * w + x] = row[x];
  }
  return out;
}

}  // namespace depthgen
