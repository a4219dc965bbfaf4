#include "depthgen/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "depthgen/image_io.hpp"
#include "depthgen/turbo.hpp"

namespace depthgen {

namespace {

constexpr double kPi = std::numbers::pi;

/// Bilinear sample of channel c at continuous pano coordinates (x, y),
/// pixel centers at half-integers; columns wrap (longitude), rows clamp.
double sample_bilinear(const Tensor& img, std::size_t c, double x, double y) {
  const std::size_t h = img.shape()[1], w = img.shape()[2];
  const double xf = x - 0.5, yf = y - 0.5;
  const long x0 = static_cast<long>(std::floor(xf));
  const long y0 = static_cast<long>(std::floor(yf));
  const double tx = xf - static_cast<double>(x0);
  const double ty = yf - static_cast<double>(y0);
  const auto wrap = [&](long j) {
    const long m = j % static_cast<long>(w);
    return static_cast<std::size_t>(m < 0 ? m + static_cast<long>(w) : m);
  };
  const auto clamp_row = [&](long i) {
    return static_cast<std::size_t>(
        std::clamp(i, 0L, static_cast<long>(h) - 1));
  };
  const std::size_t xl = wrap(x0), xr = wrap(x0 + 1);
  const std::size_t yt = clamp_row(y0), yb = clamp_row(y0 + 1);
  const double* base = img.data() + c * h * w;
  const double v00 = base[yt * w + xl], v01 = base[yt * w + xr];
  const double v10 = base[yb * w + xl], v11 = base[yb * w + xr];
  return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) +
         ty * ((1.0 - tx) * v10 + tx * v11);
}

double sample_nearest(const Tensor& img, double x, double y) {
  const std::size_t h = img.shape()[1], w = img.shape()[2];
  long ix = static_cast<long>(std::floor(x)) % static_cast<long>(w);
  if (ix < 0) ix += static_cast<long>(w);
  const long iy = std::clamp(static_cast<long>(std::floor(y)), 0L,
                             static_cast<long>(h) - 1);
  return img[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)];
}

/// Unnormalized view direction of face pixel coordinates (a, b).
void face_direction(Face face, double a, double b, double& dx, double& dy,
                    double& dz) {
  switch (face) {
    case Face::front: dx = a;    dy = b; dz = 1.0;  return;
    case Face::right: dx = 1.0;  dy = b; dz = -a;   return;
    case Face::back:  dx = -a;   dy = b; dz = -1.0; return;
    case Face::left:  dx = -1.0; dy = b; dz = a;    return;
  }
  throw std::invalid_argument("unknown cubemap face");
}

}  // namespace

void Panorama::validate() const {
  if (h < 2 || w != 2 * h)
    throw std::invalid_argument("panorama must be 2:1 equirectangular");
  const std::size_t c = kind == PanoKind::rgb ? 3 : 1;
  if (!shape_eq(data.shape(), {c, h, w}))
    throw std::invalid_argument("panorama data shape mismatch");
  if (kind == PanoKind::depth) {
    for (std::size_t i = 0; i < data.numel(); ++i)
      if (!(data[i] >= 0.0))
        throw std::invalid_argument("depth panorama must be nonnegative");
  }
  if (kind == PanoKind::labels) {
    if (num_labels == 0 || num_labels > 256)
      throw std::invalid_argument("label panorama needs 1..256 labels");
    for (std::size_t i = 0; i < data.numel(); ++i) {
      const double v = data[i];
      if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(num_labels))
        throw std::invalid_argument("label id outside [0, num_labels)");
    }
  }
}

Tensor equirect_to_face(const Panorama& pano, Face face, std::size_t S) {
  pano.validate();
  if (S < 2) throw std::invalid_argument("face side must be at least 2");
  const std::size_t ch = pano.data.shape()[0];
  const double W = static_cast<double>(pano.w), H = static_cast<double>(pano.h);
  Tensor out({ch, S, S});
  for (std::size_t v = 0; v < S; ++v) {
    const double b = 2.0 * (static_cast<double>(v) + 0.5) / S - 1.0;
    for (std::size_t u = 0; u < S; ++u) {
      const double a = 2.0 * (static_cast<double>(u) + 0.5) / S - 1.0;
      double dx, dy, dz;
      face_direction(face, a, b, dx, dy, dz);
      const double theta = std::atan2(dx, dz);
      const double phi = std::asin(dy / std::sqrt(dx * dx + dy * dy + dz * dz));
      const double x = (theta / (2.0 * kPi) + 0.5) * W;
      const double y = (phi / kPi + 0.5) * H;
      if (pano.kind == PanoKind::labels) {
        out.data()[v * S + u] = sample_nearest(pano.data, x, y);
      } else {
        for (std::size_t c = 0; c < ch; ++c)
          out.data()[(c * S + v) * S + u] = sample_bilinear(pano.data, c, x, y);
      }
    }
  }
  return out;
}

Tensor ray_to_planar(const Tensor& depth_face) {
  const Shape& s = depth_face.shape();
  if (s.size() != 3 || s[0] != 1 || s[1] != s[2])
    throw std::invalid_argument("ray_to_planar: expected square [1,S,S] face");
  const std::size_t S = s[1];
  Tensor out = depth_face;
  for (std::size_t v = 0; v < S; ++v) {
    const double b = 2.0 * (static_cast<double>(v) + 0.5) / S - 1.0;
    for (std::size_t u = 0; u < S; ++u) {
      const double a = 2.0 * (static_cast<double>(u) + 0.5) / S - 1.0;
      out.data()[v * S + u] /= std::sqrt(a * a + b * b + 1.0);
    }
  }
  return out;
}

CubemapFaces normalize_depth(const CubemapFaces& faces) {
  double top = 0.0;
  for (const Tensor& f : faces.faces) {
    if (f.numel() == 0)
      throw std::invalid_argument("normalize_depth: missing face");
    for (std::size_t i = 0; i < f.numel(); ++i) top = std::max(top, f[i]);
  }
  if (top <= 0.0)
    throw std::invalid_argument("normalize_depth: cubemap has no positive depth");
  CubemapFaces out = faces;
  for (Tensor& f : out.faces)
    for (std::size_t i = 0; i < f.numel(); ++i)
      f.data()[i] = f[i] / top * 255.0;
  return out;
}

Tensor turbo_colorize(const Tensor& depth, double d_min, double d_max) {
  if (!(d_max > d_min))
    throw std::invalid_argument("turbo_colorize: degenerate depth range");
  const Shape& s = depth.shape();
  const bool plane2 = s.size() == 2;
  if (!plane2 && (s.size() != 3 || s[0] != 1))
    throw std::invalid_argument("turbo_colorize: expected [H,W] or [1,H,W]");
  const std::size_t h = s[plane2 ? 0 : 1], w = s[plane2 ? 1 : 2];
  Tensor out({3, h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    const double t = std::clamp((depth[i] - d_min) / (d_max - d_min), 0.0, 1.0);
    const double pos = t * 255.0;
    const std::size_t i0 = std::min<std::size_t>(254, static_cast<std::size_t>(pos));
    const double f = pos - static_cast<double>(i0);
    for (std::size_t c = 0; c < 3; ++c)
      out.data()[c * h * w + i] =
          (1.0 - f) * kTurboLut[i0][c] + f * kTurboLut[i0 + 1][c];
  }
  return out;
}

std::filesystem::path prepare_scene(const SceneTriplet& scene, std::size_t S,
                                    const std::filesystem::path& out_dir,
                                    const std::string& scene_id) {
  scene.rgb.validate();
  scene.labels.validate();
  scene.depth.validate();
  if (scene.rgb.kind != PanoKind::rgb || scene.labels.kind != PanoKind::labels ||
      scene.depth.kind != PanoKind::depth)
    throw std::invalid_argument("prepare_scene: triplet kinds out of order");
  if (scene.labels.h != scene.rgb.h || scene.depth.h != scene.rgb.h)
    throw std::invalid_argument("prepare_scene: panorama sizes differ");

  CubemapFaces depth;
  depth.side = S;
  for (std::size_t k = 0; k < 4; ++k)
    depth.faces[k] =
        ray_to_planar(equirect_to_face(scene.depth, static_cast<Face>(k), S));
  depth = normalize_depth(depth);

  const std::filesystem::path dir = out_dir / scene_id;
  std::filesystem::create_directories(dir);
  const unsigned maxval =
      std::max<unsigned>(1, static_cast<unsigned>(scene.labels.num_labels) - 1);
  for (std::size_t k = 0; k < 4; ++k) {
    const Face face = static_cast<Face>(k);
    const std::string stem = kFaceNames[k];
    write_ppm(dir / (stem + ".rgb.ppm"), equirect_to_face(scene.rgb, face, S));
    write_pgm(dir / (stem + ".sem.pgm"), equirect_to_face(scene.labels, face, S),
              maxval);
    write_pfm(dir / (stem + ".depth.pfm"), depth.faces[k]);
  }
  return dir;
}

}  // namespace depthgen
