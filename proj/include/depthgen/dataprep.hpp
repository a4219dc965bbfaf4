#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "depthgen/tensor.hpp"

namespace depthgen {

enum class PanoKind { rgb, labels, depth };

/// Equirectangular panorama, width exactly twice the height.  Depth
/// panoramas hold ray distance from the camera center; label panoramas
/// hold integer ids below num_labels.
struct Panorama {
  PanoKind kind = PanoKind::depth;
  std::size_t h = 0, w = 0;
  std::size_t num_labels = 0;  // labels kind only
  Tensor data;                 // [C, h, w]; C = 3 for rgb, else 1

  void validate() const;
};

/// The four side faces of a cubemap (ceiling and floor dropped), all
/// square with the same side length.
enum class Face { front = 0, right = 1, back = 2, left = 3 };
inline constexpr std::array<const char*, 4> kFaceNames{"front", "right", "back",
                                                       "left"};

struct CubemapFaces {
  std::size_t side = 0;
  std::array<Tensor, 4> faces;  // indexed by Face order
};

/// Renders one 90-degree-FOV pinhole face of side S from the panorama.
/// Output pixel (u, v) maps to a = 2(u+0.5)/S - 1, b = 2(v+0.5)/S - 1
/// (y points down) and the face direction front=(a,b,1), right=(1,b,-a),
/// back=(-a,b,-1), left=(-1,b,a); longitude atan2(dx,dz) and latitude
/// asin(dy/|d|) index the panorama. Bilinear sampling with longitude
/// wraparound for rgb/depth, nearest for labels.
Tensor equirect_to_face(const Panorama& pano, Face face, std::size_t S);

/// Ray distance -> planar depth for a 90-degree face: multiplies each
/// pixel by the cosine between its ray and the face normal, 1/|(a,b,1)|.
Tensor ray_to_planar(const Tensor& depth_face);

/// Divides every face by the cubemap-wide maximum and rescales to
/// (0, 255). Throws if the whole cubemap is nonpositive.
CubemapFaces normalize_depth(const CubemapFaces& faces);

/// Normalizes depth into [0,1] over [d_min, d_max] (clamping) and maps it
/// through the 256-entry turbo lookup table with linear interpolation.
/// Input [1,H,W] or [H,W]; output [3,H,W] in [0,1], blue end at d_min.
Tensor turbo_colorize(const Tensor& depth, double d_min, double d_max);

/// One aligned scene: rgb, labels, and ray-distance depth panoramas of
/// identical geometry.
struct SceneTriplet {
  Panorama rgb, labels, depth;
};

/// Full conversion of one scene: renders the four faces of each modality,
/// converts depth to planar, normalizes it cubemap-wide, and writes
///   <out_dir>/<scene_id>/<face>.rgb.ppm / .sem.pgm / .depth.pfm
/// Returns the scene directory.
std::filesystem::path prepare_scene(const SceneTriplet& scene, std::size_t S,
                                    const std::filesystem::path& out_dir,
                                    const std::string& scene_id);

}  // namespace depthgen
