#pragma once

#include <array>

namespace depthgen {

/// 256-entry turbo colormap, RGB triplets in [0,1], blue end first.
extern const std::array<std::array<double, 3>, 256> kTurboLut;

}  // namespace depthgen
