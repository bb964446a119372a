#pragma once

#include <string>

#include "deadnet/model.hpp"

namespace deadnet {

struct HeatMap {
    Tensor grid;  // rows x cols x 1, sick-class probability per window
    std::size_t window = 0;
    std::size_t stride = 0;
    std::size_t image_height = 0;
    std::size_t image_width = 0;

    std::string sidecar_json() const;
};

inline constexpr std::size_t kDefaultStride = 110;

/// Classifies every window at (r * stride, c * stride), each variance-
/// normalized on its own. The window must equal the network input extent.
HeatMap sliding_window_classify(const Network& network, const Tensor& image, std::size_t window,
                                std::size_t stride = kDefaultStride);

/// Sick-class probability of one window, through the same path as a grid cell.
double classify_window(const Network& network, const Tensor& window_image);

/// Grid resampled to the full image: window centres carry the grid values,
/// pixels between them interpolate bilinearly, pixels outside the outermost
/// centres take the nearest one. Returns image_height x image_width x 1.
Tensor heatmap_to_image(const HeatMap& heatmap);

/// Align-corners bilinear interpolation of an h x w (x 1) map.
Tensor bilinear_upsample(const Tensor& map, std::size_t height, std::size_t width);

/// Red alpha blend: rgb = (1 - opacity m) * gray + opacity m * (1, 0, 0), with
/// the base image and map both clamped to [0, 1]. Returns h x w x 3.
Tensor overlay_encode(const Tensor& base, const Tensor& map, double opacity);

/// Min-max rescale to [0, 1] for display (constant images map to 0).
Tensor display_range(const Tensor& image);

}  // namespace deadnet
