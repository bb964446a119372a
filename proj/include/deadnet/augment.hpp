#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deadnet/dataset.hpp"
#include "deadnet/tensor.hpp"

// Image augmentation on single-channel h x w (x 1) tensors.

namespace deadnet {

struct AugmentConfig {
    std::size_t tps_grid_interval = 128;
    double sigma_disp = 10.0;
    std::size_t n_warps = 3;
    double blur_min = 1.1;  // blur_min == blur_max == 0 disables blurring
    double blur_max = 1.5;
    std::size_t n_blurs_a = 2;
    std::size_t n_blurs_b = 3;
    std::size_t crop_size = 256;
    std::size_t crop_stride = 128;
    std::size_t crop_rows = 6;
    std::size_t crop_cols = 9;
    bool exhaustive_crops = false;
    std::size_t temporal_window = 10;
    double sigma_noise = 0.5;
    std::size_t n_noises = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

// ---- thin-plate spline warp -------------------------------------------------

/// Control nodes at multiples of `interval` from 0 until the first multiple
/// that reaches the last pixel, in each axis.
std::vector<std::size_t> tps_nodes(std::size_t extent, std::size_t interval);

/// `displacements` is ny x nx x 2 (dy, dx) over tps_nodes(h) x tps_nodes(w).
/// The image content under node p moves to p + d; everything in between
/// follows the thin-plate interpolant. Bilinear resampling, replicated border.
Tensor tps_warp(const Tensor& image, const Tensor& displacements, std::size_t interval);

/// Draws i.i.d. Normal(0, sigma_disp^2) node displacements from `seed`.
Tensor tps_random_displacements(std::size_t height, std::size_t width, const AugmentConfig& cfg, std::uint64_t seed);
Tensor tps_warp(const Tensor& image, const AugmentConfig& cfg, std::uint64_t seed);

// ---- dihedral group ----------------------------------------------------------

Tensor rot90(const Tensor& image);  // counter-clockwise
Tensor flip_horizontal(const Tensor& image);

/// identity, rot90, rot180, rot270, then the horizontal flip of each.
std::vector<Tensor> dihedral8(const Tensor& image);
Tensor dihedral(const Tensor& image, int element);

// ---- blur, crops, normalization, noise ---------------------------------------

/// Separable Gaussian, radius ceil(3 sigma), half-sample symmetric borders.
Tensor gaussian_blur(const Tensor& image, double sigma);
double sample_blur_sigma(const AugmentConfig& cfg, std::uint64_t seed);

struct Crop {
    Tensor image;
    std::size_t row = 0, col = 0;  // grid cell
    std::size_t y = 0, x = 0;      // top-left pixel
};

std::vector<Crop> tile_crops(const Tensor& image, std::size_t crop, std::size_t stride, std::size_t rows,
                             std::size_t cols);
/// Every in-bounds grid position.
std::vector<Crop> tile_crops(const Tensor& image, std::size_t crop, std::size_t stride);
Tensor crop(const Tensor& image, std::size_t y, std::size_t x, std::size_t height, std::size_t width);

struct LabeledFrame {
    Tensor image;
    Label label = Label::Unlabeled;
    int frame_index = 0;
};

std::vector<LabeledFrame> temporal_expand(const std::vector<Tensor>& sequence, Label label,
                                          std::size_t window = 10);

/// Mean 0, (population) standard deviation 1. Throws NumericError on a
/// constant image.
Tensor variance_normalize(const Tensor& image);
Tensor add_noise(const Tensor& image, double sigma, std::uint64_t seed);

// ---- pipelines ---------------------------------------------------------------

struct AugmentedImage {
    Tensor image;
    Label label = Label::Unlabeled;
    std::string stage_position;
    int warp = -1, dihedral = 0, blur = -1, crop = -1, frame = -1, noise = -1;
    double blur_sigma = 0.0;
};

using AugmentSink = std::function<void(AugmentedImage&&)>;

/// warp (n_warps) -> blur (n_blurs_a) -> crops -> dihedral-8 -> normalize.
/// Emits n_warps * 8 * n_blurs_a * crops images; returns the count.
std::size_t pipeline_A(const Tensor& full_image, Label label, const std::string& stage_position,
                       const AugmentConfig& cfg, const AugmentSink& sink);

/// blur (n_blurs_b sigmas shared by all frames) -> dihedral-8 -> normalize ->
/// noise (n_noises) on a temporal_window-frame crop sequence.
std::size_t pipeline_B(const std::vector<Tensor>& frames, Label label, const std::string& stage_position,
                       const AugmentConfig& cfg, const AugmentSink& sink);

}  // namespace deadnet
