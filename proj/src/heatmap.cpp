#include "deadnet/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "deadnet/augment.hpp"
#include "deadnet/parallel.hpp"
#include "json.hpp"

namespace deadnet {

std::string HeatMap::sidecar_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "sick-probability-grid";
    j["window"] = window;
    j["stride"] = stride;
    j["image_height"] = image_height;
    j["image_width"] = image_width;
    j["rows"] = grid.empty() ? 0 : grid.dim(0);
    j["cols"] = grid.empty() ? 0 : grid.dim(1);
    return j.dump();
}

double classify_window(const Network& network, const Tensor& window_image) {
    const auto probs = network.predict(variance_normalize(window_image)).probs;
    return static_cast<double>(probs[kSickClass]);
}

HeatMap sliding_window_classify(const Network& network, const Tensor& image, std::size_t window, std::size_t stride) {
    const auto& in = network.spec().input;
    if (window != in.height || window != in.width) {
        throw ShapeError("window " + std::to_string(window) + " does not match the network input " +
                         std::to_string(in.height) + "x" + std::to_string(in.width));
    }
    if (stride == 0) throw Error("stride must be positive");
    if (image.rank() != 3 || image.dim(2) != in.channels) throw ShapeError("heat map needs an h x w x 1 image");
    const std::size_t h = image.dim(0), w = image.dim(1);
    if (h < window || w < window) {
        throw ShapeError("image " + shape_string(image.shape()) + " smaller than the " + std::to_string(window) +
                         " px window");
    }
    HeatMap hm;
    hm.window = window;
    hm.stride = stride;
    hm.image_height = h;
    hm.image_width = w;
    const std::size_t rows = (h - window) / stride + 1, cols = (w - window) / stride + 1;
    hm.grid = Tensor({rows, cols, 1});
    parallel_for(rows * cols, [&](std::size_t i) {
        const std::size_t r = i / cols, c = i % cols;
        hm.grid[i] = static_cast<float>(classify_window(network, crop(image, r * stride, c * stride, window, window)));
    });
    return hm;
}

Tensor heatmap_to_image(const HeatMap& hm) {
    if (hm.grid.rank() != 3 || hm.stride == 0) throw ShapeError("heat map has no grid");
    const std::size_t rows = hm.grid.dim(0), cols = hm.grid.dim(1);
    Tensor out({hm.image_height, hm.image_width, 1});
    auto coord = [&](std::size_t p, std::size_t n) {
        const double g = (static_cast<double>(p) + 0.5 - 0.5 * static_cast<double>(hm.window)) / static_cast<double>(hm.stride);
        return std::clamp(g, 0.0, static_cast<double>(n - 1));
    };
    for (std::size_t y = 0; y < hm.image_height; ++y) {
        const double gy = coord(y, rows);
        const auto y0 = static_cast<std::size_t>(gy), y1 = std::min(y0 + 1, rows - 1);
        const double fy = gy - static_cast<double>(y0);
        for (std::size_t x = 0; x < hm.image_width; ++x) {
            const double gx = coord(x, cols);
            const auto x0 = static_cast<std::size_t>(gx), x1 = std::min(x0 + 1, cols - 1);
            const double fx = gx - static_cast<double>(x0);
            const double top = (1 - fx) * hm.grid[y0 * cols + x0] + fx * hm.grid[y0 * cols + x1];
            const double bottom = (1 - fx) * hm.grid[y1 * cols + x0] + fx * hm.grid[y1 * cols + x1];
            out[y * hm.image_width + x] = static_cast<float>((1 - fy) * top + fy * bottom);
        }
    }
    return out;
}

Tensor bilinear_upsample(const Tensor& map, std::size_t height, std::size_t width) {
    if (map.rank() < 2 || map.rank() > 3 || (map.rank() == 3 && map.dim(2) != 1)) {
        throw ShapeError("bilinear_upsample expects an h x w map, got " + shape_string(map.shape()));
    }
    const std::size_t h = map.dim(0), w = map.dim(1);
    if (height < h || width < w) throw ShapeError("upsample target smaller than the source map");
    Tensor out(map.rank() == 2 ? Shape{height, width} : Shape{height, width, 1});
    auto source = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
        return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1) : 0.0;
    };
    for (std::size_t y = 0; y < height; ++y) {
        const double sy = source(y, height, h);
        const auto y0 = std::min(static_cast<std::size_t>(sy), h - 1), y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double sx = source(x, width, w);
            const auto x0 = std::min(static_cast<std::size_t>(sx), w - 1), x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = (1 - fx) * map[y0 * w + x0] + fx * map[y0 * w + x1];
            const double bottom = (1 - fx) * map[y1 * w + x0] + fx * map[y1 * w + x1];
            out[y * width + x] = static_cast<float>((1 - fy) * top + fy * bottom);
        }
    }
    return out;
}

Tensor overlay_encode(const Tensor& base, const Tensor& map, double opacity) {
    if (base.rank() < 2 || map.rank() < 2 || base.dim(0) != map.dim(0) || base.dim(1) != map.dim(1) ||
        base.size() != base.dim(0) * base.dim(1) || map.size() != map.dim(0) * map.dim(1)) {
        throw ShapeError("overlay needs single-channel base and map of equal extents, got " +
                         shape_string(base.shape()) + " and " + shape_string(map.shape()));
    }
    if (opacity < 0 || opacity > 1) throw Error("opacity must lie in [0, 1]");
    const std::size_t n = base.dim(0) * base.dim(1);
    Tensor out({base.dim(0), base.dim(1), 3});
    for (std::size_t i = 0; i < n; ++i) {
        const double g = std::clamp<double>(base[i], 0.0, 1.0);
        const double a = opacity * std::clamp<double>(map[i], 0.0, 1.0);
        out[3 * i] = static_cast<float>((1 - a) * g + a);
        out[3 * i + 1] = static_cast<float>((1 - a) * g);
        out[3 * i + 2] = static_cast<float>((1 - a) * g);
    }
    return out;
}

Tensor display_range(const Tensor& image) {
    const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
    Tensor out(image.shape());
    if (image.empty() || *hi == *lo) return out;
    const double span = static_cast<double>(*hi) - *lo;
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<float>((image[i] - *lo) / span);
    return out;
}

}  // namespace deadnet
