#include "deadnet/augment.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "deadnet/random.hpp"

namespace deadnet {

namespace {

struct Plane {
    std::size_t h, w;
};

Plane gray_plane(const Tensor& image, const char* op) {
    if ((image.rank() == 2) || (image.rank() == 3 && image.dim(2) == 1)) return {image.dim(0), image.dim(1)};
    throw ShapeError(std::string(op) + " expects a single-channel h x w image, got " + shape_string(image.shape()));
}

Shape like(const Tensor& image, std::size_t h, std::size_t w) {
    return image.rank() == 2 ? Shape{h, w} : Shape{h, w, 1};
}

// half-sample symmetric reflection: ... c b a | a b c ... | c b a ...
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
    const std::ptrdiff_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

// thin-plate radial basis r^2 log r, written in terms of r^2
double tps_kernel(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }

}  // namespace

void AugmentConfig::validate() const {
    if (tps_grid_interval == 0) throw Error("tps grid interval must be positive");
    if (sigma_disp < 0 || sigma_noise < 0) throw Error("sigma values must be non-negative");
    if (blur_min < 0 || blur_max < blur_min) throw Error("blur sigma range must satisfy 0 <= min <= max");
    if (crop_size == 0 || crop_stride == 0 || crop_stride > crop_size) throw Error("need 0 < crop_stride <= crop_size");
    if (n_warps == 0 || n_blurs_a == 0 || n_blurs_b == 0 || n_noises == 0 || temporal_window == 0) {
        throw Error("augmentation multiplicities must be at least 1");
    }
}

// ---- thin-plate spline -------------------------------------------------------

std::vector<std::size_t> tps_nodes(std::size_t extent, std::size_t interval) {
    if (interval == 0) throw Error("tps grid interval must be positive");
    std::vector<std::size_t> nodes{0};
    while (nodes.back() + 1 < extent) nodes.push_back(nodes.back() + interval);
    if (nodes.size() < 2) nodes.push_back(interval);
    return nodes;
}

Tensor tps_warp(const Tensor& image, const Tensor& displacements, std::size_t interval) {
    const auto [h, w] = gray_plane(image, "tps_warp");
    if (h <= interval && w <= interval) throw Error("tps_warp needs an image larger than one grid cell");
    const auto ys = tps_nodes(h, interval), xs = tps_nodes(w, interval);
    require_shape(displacements, {ys.size(), xs.size(), 2}, "tps displacements");
    const std::size_t n = ys.size() * xs.size();

    // Interpolate the backward map q -> source offset, pinned at the moved
    // nodes: offset(p + d) = -d.
    Eigen::MatrixXd ty(n, 1), tx(n, 1);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    bool any = false;
    for (std::size_t i = 0; i < ys.size(); ++i)
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const auto k = i * xs.size() + j;
            const double dy = displacements.at(i, j, 0), dx = displacements.at(i, j, 1);
            ty(k) = static_cast<double>(ys[i]) + dy;
            tx(k) = static_cast<double>(xs[j]) + dx;
            rhs(k, 0) = -dy;
            rhs(k, 1) = -dx;
            any = any || dy != 0.0 || dx != 0.0;
        }
    if (!any) return image;

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double ry = ty(a) - ty(b), rx = tx(a) - tx(b);
            L(a, b) = tps_kernel(ry * ry + rx * rx);
        }
        L(a, n) = L(n, a) = 1.0;
        L(a, n + 1) = L(n + 1, a) = ty(a);
        L(a, n + 2) = L(n + 2, a) = tx(a);
    }
    const Eigen::MatrixXd coef = L.fullPivLu().solve(rhs);
    if (!coef.allFinite()) throw NumericError("thin-plate spline system is singular");

    Tensor out(image.shape());
    const auto src = image.data();
    std::vector<double> basis(n);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double qy = static_cast<double>(y), qx = static_cast<double>(x);
            double oy = coef(n, 0) + coef(n + 1, 0) * qy + coef(n + 2, 0) * qx;
            double ox = coef(n, 1) + coef(n + 1, 1) * qy + coef(n + 2, 1) * qx;
            for (std::size_t k = 0; k < n; ++k) {
                const double ry = qy - ty(k), rx = qx - tx(k);
                const double u = tps_kernel(ry * ry + rx * rx);
                oy += coef(k, 0) * u;
                ox += coef(k, 1) * u;
            }
            const double sy = std::clamp(qy + oy, 0.0, static_cast<double>(h - 1));
            const double sx = std::clamp(qx + ox, 0.0, static_cast<double>(w - 1));
            const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
            const auto y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
            const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
            const double v = (1 - fy) * ((1 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                             fy * ((1 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
            out[y * w + x] = static_cast<float>(v);
        }
    return out;
}

Tensor tps_random_displacements(std::size_t height, std::size_t width, const AugmentConfig& cfg,
                                std::uint64_t seed) {
    const auto ny = tps_nodes(height, cfg.tps_grid_interval).size();
    const auto nx = tps_nodes(width, cfg.tps_grid_interval).size();
    Tensor d({ny, nx, 2});
    if (cfg.sigma_disp == 0.0) return d;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, cfg.sigma_disp);
    for (auto& v : d.data()) v = static_cast<float>(normal(rng));
    return d;
}

Tensor tps_warp(const Tensor& image, const AugmentConfig& cfg, std::uint64_t seed) {
    const auto [h, w] = gray_plane(image, "tps_warp");
    return tps_warp(image, tps_random_displacements(h, w, cfg, seed), cfg.tps_grid_interval);
}

// ---- dihedral ------------------------------------------------------------------

Tensor rot90(const Tensor& image) {
    const auto [h, w] = gray_plane(image, "rot90");
    Tensor out(like(image, w, h));
    for (std::size_t y = 0; y < w; ++y)
        for (std::size_t x = 0; x < h; ++x) out[y * h + x] = image[x * w + (w - 1 - y)];
    return out;
}

Tensor flip_horizontal(const Tensor& image) {
    const auto [h, w] = gray_plane(image, "flip_horizontal");
    Tensor out(image.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out[y * w + x] = image[y * w + (w - 1 - x)];
    return out;
}

Tensor dihedral(const Tensor& image, int element) {
    const auto [h, w] = gray_plane(image, "dihedral");
    if (h != w) throw ShapeError("dihedral transforms need a square image, got " + shape_string(image.shape()));
    if (element < 0 || element > 7) throw Error("dihedral element must be in 0..7");
    Tensor out = image;
    for (int i = 0; i < element % 4; ++i) out = rot90(out);
    return element >= 4 ? flip_horizontal(out) : out;
}

std::vector<Tensor> dihedral8(const Tensor& image) {
    std::vector<Tensor> out;
    out.reserve(8);
    for (int e = 0; e < 8; ++e) out.push_back(dihedral(image, e));
    return out;
}

// ---- blur ----------------------------------------------------------------------

Tensor gaussian_blur(const Tensor& image, double sigma) {
    if (!(sigma > 0.0)) throw Error("blur sigma must be positive");
    const auto [h, w] = gray_plane(image, "gaussian_blur");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-static_cast<double>(i * i) / (2 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i + radius)];
    }
    for (auto& v : k) v /= sum;

    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    std::vector<double> rows(h * w);
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double acc = 0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * image[static_cast<std::size_t>(y * W + reflect(x + i, W))];
            rows[static_cast<std::size_t>(y * W + x)] = acc;
        }
    Tensor out(image.shape());
    for (std::ptrdiff_t y = 0; y < H; ++y)
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double acc = 0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * rows[static_cast<std::size_t>(reflect(y + i, H) * W + x)];
            out[static_cast<std::size_t>(y * W + x)] = static_cast<float>(acc);
        }
    return out;
}

double sample_blur_sigma(const AugmentConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return std::uniform_real_distribution<double>(cfg.blur_min, cfg.blur_max)(rng);
}

// ---- crops ---------------------------------------------------------------------

Tensor crop(const Tensor& image, std::size_t y, std::size_t x, std::size_t height, std::size_t width) {
    const auto [h, w] = gray_plane(image, "crop");
    if (height == 0 || width == 0 || y + height > h || x + width > w) {
        throw ShapeError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                         std::to_string(y) + ", " + std::to_string(x) + ") exceeds " + shape_string(image.shape()));
    }
    Tensor out(like(image, height, width));
    for (std::size_t r = 0; r < height; ++r) {
        const auto src = image.data().subspan((y + r) * w + x, width);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return out;
}

std::vector<Crop> tile_crops(const Tensor& image, std::size_t size, std::size_t stride, std::size_t rows,
                             std::size_t cols) {
    const auto [h, w] = gray_plane(image, "tile_crops");
    if (stride == 0 || rows == 0 || cols == 0) throw Error("crop grid needs positive stride and extents");
    if ((rows - 1) * stride + size > h || (cols - 1) * stride + size > w) {
        throw ShapeError("crop grid " + std::to_string(rows) + "x" + std::to_string(cols) + " of " +
                         std::to_string(size) + " px exceeds " + shape_string(image.shape()));
    }
    std::vector<Crop> out;
    out.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out.push_back({crop(image, r * stride, c * stride, size, size), r, c, r * stride, c * stride});
    return out;
}

std::vector<Crop> tile_crops(const Tensor& image, std::size_t size, std::size_t stride) {
    const auto [h, w] = gray_plane(image, "tile_crops");
    if (size > h || size > w) throw ShapeError("crop of " + std::to_string(size) + " px exceeds " + shape_string(image.shape()));
    if (stride == 0) throw Error("crop stride must be positive");
    return tile_crops(image, size, stride, (h - size) / stride + 1, (w - size) / stride + 1);
}

std::vector<LabeledFrame> temporal_expand(const std::vector<Tensor>& sequence, Label label, std::size_t window) {
    if (sequence.size() != window) {
        throw Error("sequence has " + std::to_string(sequence.size()) + " frames, expected " + std::to_string(window));
    }
    std::vector<LabeledFrame> out;
    out.reserve(window);
    for (std::size_t i = 0; i < window; ++i) out.push_back({sequence[i], label, static_cast<int>(i)});
    return out;
}

// ---- normalization and noise ---------------------------------------------------

Tensor variance_normalize(const Tensor& image) {
    if (image.empty()) throw ShapeError("variance_normalize of an empty image");
    double mean = 0;
    for (float v : image.data()) mean += v;
    mean /= static_cast<double>(image.size());
    double var = 0;
    for (float v : image.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(image.size());
    if (!(var > 1e-24)) throw NumericError("cannot variance-normalize a constant image");
    const double inv = 1.0 / std::sqrt(var);
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<float>((image[i] - mean) * inv);
    return out;
}

Tensor add_noise(const Tensor& image, double sigma, std::uint64_t seed) {
    if (sigma < 0) throw Error("noise sigma must be non-negative");
    if (sigma == 0.0) return image;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<float>(image[i] + normal(rng));
    return out;
}

// ---- pipelines -----------------------------------------------------------------

namespace {

bool blur_enabled(const AugmentConfig& cfg) { return cfg.blur_max > 0.0; }

}  // namespace

std::size_t pipeline_A(const Tensor& full_image, Label label, const std::string& stage_position,
                       const AugmentConfig& cfg, const AugmentSink& sink) {
    cfg.validate();
    check_finite(full_image, "pipeline_A input");
    std::size_t emitted = 0;
    for (std::size_t w = 0; w < cfg.n_warps; ++w) {
        const Tensor warped = cfg.sigma_disp > 0 ? tps_warp(full_image, cfg, mix_seed(cfg.seed, 1, w)) : full_image;
        for (std::size_t b = 0; b < cfg.n_blurs_a; ++b) {
            const double sigma = blur_enabled(cfg) ? sample_blur_sigma(cfg, mix_seed(cfg.seed, 2, w * cfg.n_blurs_a + b)) : 0.0;
            const Tensor blurred = sigma > 0 ? gaussian_blur(warped, sigma) : warped;
            const auto crops = cfg.exhaustive_crops
                                   ? tile_crops(blurred, cfg.crop_size, cfg.crop_stride)
                                   : tile_crops(blurred, cfg.crop_size, cfg.crop_stride, cfg.crop_rows, cfg.crop_cols);
            for (std::size_t c = 0; c < crops.size(); ++c)
                for (int r = 0; r < 8; ++r) {
                    AugmentedImage item;
                    item.image = variance_normalize(dihedral(crops[c].image, r));
                    item.label = label;
                    item.stage_position = stage_position;
                    item.warp = static_cast<int>(w);
                    item.dihedral = r;
                    item.blur = static_cast<int>(b);
                    item.blur_sigma = sigma;
                    item.crop = static_cast<int>(c);
                    sink(std::move(item));
                    ++emitted;
                }
        }
    }
    return emitted;
}

std::size_t pipeline_B(const std::vector<Tensor>& frames, Label label, const std::string& stage_position,
                       const AugmentConfig& cfg, const AugmentSink& sink) {
    cfg.validate();
    const auto labeled = temporal_expand(frames, label, cfg.temporal_window);
    std::vector<double> sigmas(cfg.n_blurs_b, 0.0);
    if (blur_enabled(cfg))
        for (std::size_t b = 0; b < sigmas.size(); ++b) sigmas[b] = sample_blur_sigma(cfg, mix_seed(cfg.seed, 3, b));

    std::size_t emitted = 0;
    for (const auto& frame : labeled) {
        check_finite(frame.image, "pipeline_B frame");
        for (std::size_t b = 0; b < sigmas.size(); ++b) {
            const Tensor blurred = sigmas[b] > 0 ? gaussian_blur(frame.image, sigmas[b]) : frame.image;
            for (int r = 0; r < 8; ++r) {
                const Tensor normalized = variance_normalize(dihedral(blurred, r));
                for (std::size_t n = 0; n < cfg.n_noises; ++n) {
                    const auto item_index =
                        ((static_cast<std::uint64_t>(frame.frame_index) * sigmas.size() + b) * 8 + r) * cfg.n_noises + n;
                    AugmentedImage item;
                    item.image = add_noise(normalized, cfg.sigma_noise, mix_seed(cfg.seed, 4, item_index));
                    item.label = frame.label;
                    item.stage_position = stage_position;
                    item.dihedral = r;
                    item.blur = static_cast<int>(b);
                    item.blur_sigma = sigmas[b];
                    item.frame = frame.frame_index;
                    item.noise = static_cast<int>(n);
                    sink(std::move(item));
                    ++emitted;
                }
            }
        }
    }
    return emitted;
}

}  // namespace deadnet
