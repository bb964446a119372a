#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "deadnet/tensor.hpp"

namespace deadnet {

enum class Label { Healthy, Sick, Unlabeled };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

/// Network class index: Healthy 0, Sick 1.
int class_index(Label label);
Label label_of_class(int index);

inline constexpr int kHealthyClass = 0;
inline constexpr int kSickClass = 1;

struct ImageRecord {
    std::string path;
    std::string stage_position;
    double light_dose = 0.0;  // seconds of 395 nm exposure, 0..200
    int frame_index = 0;
    Label label = Label::Unlabeled;
    std::string source;  // "synthetic-proxy" for generated data, empty otherwise

    void validate() const;
    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

std::string to_json_line(const ImageRecord& record);
ImageRecord record_from_json(std::string_view line);

// Manifests are JSON-lines, one ImageRecord per line.
void write_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records);
std::vector<ImageRecord> read_manifest(const std::filesystem::path& path);

template <typename Item>
struct Split {
    std::vector<Item> train;
    std::vector<Item> test;
};

inline const std::string& stage_position_of(const ImageRecord& r) { return r.stage_position; }

/// Partitions stage positions (not items) so that no position appears on both
/// sides. round(test_fraction * positions) positions go to test, clamped so
/// each side keeps at least one.
template <typename Item>
Split<Item> split_by_position(const std::vector<Item>& items, double test_fraction, std::uint64_t seed) {
    std::set<std::string> unique;
    for (const auto& it : items) unique.insert(stage_position_of(it));
    if (unique.size() < 2) throw Error("split_by_position needs at least two distinct stage positions");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test fraction must lie in (0, 1)");
    std::vector<std::string> positions(unique.begin(), unique.end());
    std::mt19937_64 rng(seed);
    std::shuffle(positions.begin(), positions.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(positions.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, positions.size() - 1);
    const std::set<std::string> test_positions(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(n_test));
    Split<Item> out;
    for (const auto& it : items) {
        (test_positions.count(stage_position_of(it)) ? out.test : out.train).push_back(it);
    }
    return out;
}

// ---- image IO --------------------------------------------------------------
// PNG (8/16-bit grayscale) and binary PGM. Pixel values map to [0, 1].

Tensor load_image(const std::filesystem::path& path);
void save_image(const Tensor& image, const std::filesystem::path& path, int bit_depth = 16);

/// h x w x 3 tensor in [0, 1] written as an 8-bit RGB PNG.
void save_rgb_png(const Tensor& rgb, const std::filesystem::path& path);

/// Raw little-endian float32 dump plus a JSON sidecar (<path>.json) holding
/// the shape and any extra fields.
void save_raw(const Tensor& t, const std::filesystem::path& path, const std::string& sidecar_json = "{}");
Tensor load_raw(const std::filesystem::path& path);

// ---- synthetic proxy data --------------------------------------------------

enum class SickRegion { Whole, Quadrant };

struct SyntheticSpec {
    std::size_t height = 74;
    std::size_t width = 74;
    double noise_floor = 0.03;
    std::size_t images_per_position = 10;
    std::uint64_t seed = 1;
    /// Quadrant mode: every image has a designated quadrant. The other three
    /// hold healthy cells for both classes alike; the designated one holds
    /// healthy cells or sick structure, so all class evidence lies there.
    SickRegion sick_region = SickRegion::Whole;

    // healthy: smooth elliptical bodies with bright punctae
    std::size_t healthy_cells_min = 2, healthy_cells_max = 5;
    double healthy_radius_min = 0.10, healthy_radius_max = 0.17;  // fraction of the short side
    // sick: high-contrast rings, dark punctae, emptier background
    std::size_t sick_cells_min = 1, sick_cells_max = 3;
    double sick_radius_min = 0.06, sick_radius_max = 0.11;
    std::size_t dark_punctae_min = 6, dark_punctae_max = 14;
};

struct SyntheticImage {
    Tensor image;  // h x w x 1 in [0, 1]
    ImageRecord record;
    int quadrant = -1;  // 0 TL, 1 TR, 2 BL, 3 BR in quadrant mode
};

inline constexpr std::string_view kSyntheticSource = "synthetic-proxy";

/// Deterministic per (spec.seed, label, index); images with index i share the
/// stage position i / images_per_position.
std::vector<SyntheticImage> generate_synthetic(const SyntheticSpec& spec, Label label, std::size_t count,
                                               std::size_t first_index = 0);

SyntheticImage generate_synthetic_one(const SyntheticSpec& spec, Label label, std::size_t index);

}  // namespace deadnet
