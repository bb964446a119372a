#include "deadnet/dataset.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "json.hpp"

namespace deadnet {

std::string_view to_string(Label label) {
    switch (label) {
        case Label::Healthy: return "Healthy";
        case Label::Sick: return "Sick";
        case Label::Unlabeled: return "Unlabeled";
    }
    return "Unlabeled";
}

Label parse_label(std::string_view text) {
    if (text == "Healthy") return Label::Healthy;
    if (text == "Sick") return Label::Sick;
    if (text == "Unlabeled") return Label::Unlabeled;
    throw FormatError("unknown image label '" + std::string(text) + "'");
}

int class_index(Label label) {
    switch (label) {
        case Label::Healthy: return kHealthyClass;
        case Label::Sick: return kSickClass;
        case Label::Unlabeled: break;
    }
    throw Error("unlabeled image has no class index");
}

Label label_of_class(int index) {
    if (index == kHealthyClass) return Label::Healthy;
    if (index == kSickClass) return Label::Sick;
    throw Error("class index " + std::to_string(index) + " has no label");
}

void ImageRecord::validate() const {
    if (!(light_dose >= 0.0 && light_dose <= 200.0)) {
        throw Error("light dose " + std::to_string(light_dose) + " s outside [0, 200]");
    }
    if (stage_position.empty()) throw Error("image record without a stage position: " + path);
}

std::string to_json_line(const ImageRecord& r) {
    nlohmann::ordered_json j;
    j["path"] = r.path;
    j["stage_position"] = r.stage_position;
    j["light_dose"] = r.light_dose;
    j["frame_index"] = r.frame_index;
    j["label"] = std::string(to_string(r.label));
    if (!r.source.empty()) j["source"] = r.source;
    return j.dump();
}

ImageRecord record_from_json(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        ImageRecord r;
        r.path = j.at("path").get<std::string>();
        r.stage_position = j.at("stage_position").get<std::string>();
        r.light_dose = j.value("light_dose", 0.0);
        r.frame_index = j.value("frame_index", 0);
        r.label = parse_label(j.value("label", std::string("Unlabeled")));
        r.source = j.value("source", std::string());
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest line: ") + e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write manifest " + path.string());
    for (const auto& r : records) os << to_json_line(r) << '\n';
    if (!os) throw IoError("failed writing manifest " + path.string());
}

std::vector<ImageRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read manifest " + path.string());
    std::vector<ImageRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(line));
        } catch (const Error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---- image IO --------------------------------------------------------------

Tensor load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
    cv::Mat m;
    try {
        m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw FormatError("cannot decode image " + path.string() + ": " + e.what());
    }
    if (m.empty()) throw FormatError("unsupported or corrupt image: " + path.string());
    if (m.channels() != 1) throw FormatError("expected a grayscale image: " + path.string());
    Tensor t({static_cast<std::size_t>(m.rows), static_cast<std::size_t>(m.cols), 1});
    double scale = 0.0;
    if (m.depth() == CV_8U) {
        scale = 255.0;
    } else if (m.depth() == CV_16U) {
        scale = 65535.0;
    } else {
        throw FormatError("unsupported pixel depth in " + path.string());
    }
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const double v = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
            t[static_cast<std::size_t>(y) * t.dim(1) + static_cast<std::size_t>(x)] = static_cast<float>(v / scale);
        }
    return t;
}

void save_image(const Tensor& image, const std::filesystem::path& path, int bit_depth) {
    if (image.rank() < 2 || (image.rank() == 3 && image.dim(2) != 1)) {
        throw ShapeError("save_image expects an h x w (x 1) tensor, got " + shape_string(image.shape()));
    }
    if (bit_depth != 8 && bit_depth != 16) throw Error("bit depth must be 8 or 16");
    const int rows = static_cast<int>(image.dim(0)), cols = static_cast<int>(image.dim(1));
    const double scale = bit_depth == 8 ? 255.0 : 65535.0;
    cv::Mat m(rows, cols, bit_depth == 8 ? CV_8UC1 : CV_16UC1);
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            const double v = std::clamp<double>(image[static_cast<std::size_t>(y * cols + x)], 0.0, 1.0);
            const auto q = std::lround(v * scale);
            if (bit_depth == 8) {
                m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(q);
            } else {
                m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(q);
            }
        }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), m);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write image " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write image " + path.string());
}

void save_rgb_png(const Tensor& rgb, const std::filesystem::path& path) {
    if (rgb.rank() != 3 || rgb.dim(2) != 3) throw ShapeError("save_rgb_png expects h x w x 3");
    const int rows = static_cast<int>(rgb.dim(0)), cols = static_cast<int>(rgb.dim(1));
    cv::Mat m(rows, cols, CV_8UC3);
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            auto& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp<double>(rgb.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
                                                           static_cast<std::size_t>(c)),
                                                    0.0, 1.0);
                px[2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0));  // OpenCV stores BGR
            }
        }
    if (!cv::imwrite(path.string(), m)) throw IoError("cannot write image " + path.string());
}

void save_raw(const Tensor& t, const std::filesystem::path& path, const std::string& sidecar_json) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    for (float f : t.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                               static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
        os.write(bytes, 4);
    }
    auto side = nlohmann::ordered_json::parse(sidecar_json);
    side["shape"] = t.shape();
    side["dtype"] = "float32-le";
    std::ofstream js(path.string() + ".json", std::ios::trunc);
    js << side.dump(2) << '\n';
    if (!os || !js) throw IoError("failed writing " + path.string());
}

Tensor load_raw(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw IoError("missing sidecar for " + path.string());
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad sidecar: ") + e.what());
    }
    const auto shape = side.at("shape").get<Shape>();
    std::ifstream is(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() != 4 * shape_size(shape)) throw FormatError("raw dump size does not match its sidecar");
    Tensor t(shape);
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint32_t bits = b[4 * i] | (b[4 * i + 1] << 8) | (b[4 * i + 2] << 16) |
                                   (static_cast<std::uint32_t>(b[4 * i + 3]) << 24);
        t[i] = std::bit_cast<float>(bits);
    }
    return t;
}

// ---- synthetic proxy -------------------------------------------------------

namespace {

std::uint64_t image_seed(std::uint64_t seed, Label label, std::size_t index) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(label) + 1)) ^
                      (0xd1b54a32d192ed03ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Canvas {
    std::size_t h, w;
    std::vector<double> px;

    Canvas(std::size_t h_, std::size_t w_, double fill) : h(h_), w(w_), px(h_ * w_, fill) {}
    double& at(std::size_t y, std::size_t x) { return px[y * w + x]; }

    // additive Gaussian blob
    void blob(double cy, double cx, double sigma, double amplitude) {
        const double r = 3.0 * sigma;
        const auto y0 = static_cast<std::ptrdiff_t>(std::floor(cy - r)), y1 = static_cast<std::ptrdiff_t>(std::ceil(cy + r));
        const auto x0 = static_cast<std::ptrdiff_t>(std::floor(cx - r)), x1 = static_cast<std::ptrdiff_t>(std::ceil(cx + r));
        for (auto y = std::max<std::ptrdiff_t>(y0, 0); y <= std::min<std::ptrdiff_t>(y1, h - 1); ++y)
            for (auto x = std::max<std::ptrdiff_t>(x0, 0); x <= std::min<std::ptrdiff_t>(x1, w - 1); ++x) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                at(y, x) += amplitude * std::exp(-d2 / (2 * sigma * sigma));
            }
    }
};

struct Box {
    double y0, x0, y1, x1;
};

void healthy_cell(Canvas& c, std::mt19937_64& rng, const Box& box, double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = radius * (0.8 + 0.4 * u(rng)), b = radius * (0.7 + 0.3 * u(rng));
    const double cy = box.y0 + (box.y1 - box.y0) * u(rng), cx = box.x0 + (box.x1 - box.x0) * u(rng);
    const double th = std::numbers::pi * u(rng);
    const double ct = std::cos(th), st = std::sin(th);
    const double reach = a + 3;
    for (auto y = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cy - reach));
         y <= std::min<std::ptrdiff_t>(c.h - 1, static_cast<std::ptrdiff_t>(cy + reach)); ++y)
        for (auto x = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cx - reach));
             x <= std::min<std::ptrdiff_t>(c.w - 1, static_cast<std::ptrdiff_t>(cx + reach)); ++x) {
            const double dy = y - cy, dx = x - cx;
            const double p = (dx * ct + dy * st) / a, q = (-dx * st + dy * ct) / b;
            const double d = std::sqrt(p * p + q * q);
            // smooth body with a soft edge about 1.5 px wide
            c.at(y, x) += 0.16 / (1.0 + std::exp((d - 1.0) * a / 1.5));
        }
    const int punctae = 2 + static_cast<int>(u(rng) * 3);
    for (int i = 0; i < punctae; ++i) {
        const double r = 0.45 * std::sqrt(u(rng)), phi = 2 * std::numbers::pi * u(rng);
        c.blob(cy + r * b * std::sin(phi), cx + r * a * std::cos(phi), 1.1, 0.22);
    }
}

void sick_cell(Canvas& c, std::mt19937_64& rng, const Box& box, double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = radius * (0.8 + 0.4 * u(rng));
    const double cy = box.y0 + (box.y1 - box.y0) * u(rng), cx = box.x0 + (box.x1 - box.x0) * u(rng);
    const double reach = r + 4;
    for (auto y = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cy - reach));
         y <= std::min<std::ptrdiff_t>(c.h - 1, static_cast<std::ptrdiff_t>(cy + reach)); ++y)
        for (auto x = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(cx - reach));
             x <= std::min<std::ptrdiff_t>(c.w - 1, static_cast<std::ptrdiff_t>(cx + reach)); ++x) {
            const double d = std::hypot(y - cy, x - cx);
            c.at(y, x) += 0.42 * std::exp(-((d - r) * (d - r)) / (2 * 1.0 * 1.0));  // bright halo ring
            if (d < r - 1.0) c.at(y, x) -= 0.18;                                   // dark rounded body
        }
}

void dark_punctae(Canvas& c, std::mt19937_64& rng, const Box& box, std::size_t count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
        c.blob(box.y0 + (box.y1 - box.y0) * u(rng), box.x0 + (box.x1 - box.x0) * u(rng), 0.9, -0.3);
    }
}

std::size_t draw_count(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
}

// Gives the designated quadrant the mean and standard deviation of the other
// three, so per-crop variance normalization cannot spread class evidence.
void match_quadrant_moments(Tensor& image, int q) {
    const std::size_t h = image.dim(0), w = image.dim(1);
    auto inside = [&](std::size_t y, std::size_t x) { return (y >= h / 2) == (q / 2 == 1) && (x >= w / 2) == (q % 2 == 1); };
    double s[2] = {0, 0}, s2[2] = {0, 0}, n[2] = {0, 0};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const int k = inside(y, x);
            const double v = image[y * w + x];
            s[k] += v;
            s2[k] += v * v;
            n[k] += 1;
        }
    const double mo = s[0] / n[0], mi = s[1] / n[1];
    const double so = std::sqrt(std::max(s2[0] / n[0] - mo * mo, 0.0));
    const double si = std::sqrt(std::max(s2[1] / n[1] - mi * mi, 0.0));
    if (si <= 0.0) return;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (inside(y, x)) {
                auto& v = image[y * w + x];
                v = static_cast<float>(std::clamp((v - mi) / si * so + mo, 0.0, 1.0));
            }
}

}  // namespace

SyntheticImage generate_synthetic_one(const SyntheticSpec& spec, Label label, std::size_t index) {
    if (label == Label::Unlabeled) throw Error("synthetic images need a Healthy or Sick label");
    if (spec.height < 16 || spec.width < 16) throw Error("synthetic images must be at least 16x16");
    std::mt19937_64 rng(image_seed(spec.seed, label, index));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double side = static_cast<double>(std::min(spec.height, spec.width));
    const double H = static_cast<double>(spec.height), W = static_cast<double>(spec.width);

    Canvas c(spec.height, spec.width, 0.45);
    // gentle illumination gradient
    const double gy = 0.04 * (u(rng) - 0.5), gx = 0.04 * (u(rng) - 0.5);
    for (std::size_t y = 0; y < c.h; ++y)
        for (std::size_t x = 0; x < c.w; ++x) c.at(y, x) += gy * (y / H - 0.5) + gx * (x / W - 0.5);

    const Box full{0, 0, H - 1, W - 1};
    SyntheticImage out;
    auto uniform_radius = [&](double lo, double hi) { return side * (lo + (hi - lo) * u(rng)); };

    if (spec.sick_region == SickRegion::Whole) {
        if (label == Label::Healthy) {
            const auto n = draw_count(rng, spec.healthy_cells_min, spec.healthy_cells_max);
            for (std::size_t i = 0; i < n; ++i)
                healthy_cell(c, rng, full, uniform_radius(spec.healthy_radius_min, spec.healthy_radius_max));
        } else {
            const auto n = draw_count(rng, spec.sick_cells_min, spec.sick_cells_max);
            for (std::size_t i = 0; i < n; ++i)
                sick_cell(c, rng, full, uniform_radius(spec.sick_radius_min, spec.sick_radius_max));
            dark_punctae(c, rng, full, draw_count(rng, spec.dark_punctae_min, spec.dark_punctae_max));
        }
    } else {
        // The designated quadrant is drawn for both classes. Outside it the two
        // classes are identically distributed; only its content differs.
        out.quadrant = static_cast<int>(draw_count(rng, 0, 3));
        const int q = out.quadrant;
        const double hy = H / 2, hx = W / 2;
        auto quadrant_box = [&](int k, double inset) {
            return Box{(k / 2 ? hy : 0) + inset, (k % 2 ? hx : 0) + inset, (k / 2 ? H - 1 : hy) - inset,
                       (k % 2 ? W - 1 : hx) - inset};
        };
        const auto n = draw_count(rng, spec.healthy_cells_min, spec.healthy_cells_max);
        for (std::size_t i = 0; i < n; ++i) {
            const int k = (q + 1 + static_cast<int>(i % 3)) % 4;
            const double r = uniform_radius(spec.healthy_radius_min, spec.healthy_radius_max);
            healthy_cell(c, rng, quadrant_box(k, std::min(1.2 * r + 2, hy / 2 - 1)), r);
        }
        if (label == Label::Healthy) {
            const auto m = draw_count(rng, 1, 2);
            for (std::size_t i = 0; i < m; ++i) {
                const double r = uniform_radius(spec.healthy_radius_min, spec.healthy_radius_max);
                healthy_cell(c, rng, quadrant_box(q, std::min(1.2 * r + 2, hy / 2 - 1)), r);
            }
        } else {
            const auto m = draw_count(rng, std::max<std::size_t>(spec.sick_cells_min, 1), spec.sick_cells_max);
            for (std::size_t i = 0; i < m; ++i) {
                const double r = uniform_radius(spec.sick_radius_min, spec.sick_radius_max);
                sick_cell(c, rng, quadrant_box(q, std::min(1.2 * r + 3, hy / 2 - 1)), r);
            }
            dark_punctae(c, rng, quadrant_box(q, 4),
                         draw_count(rng, spec.dark_punctae_min / 2, spec.dark_punctae_max / 2));
        }
    }

    std::normal_distribution<double> noise(0.0, spec.noise_floor);
    out.image = Tensor({spec.height, spec.width, 1});
    for (std::size_t i = 0; i < c.px.size(); ++i) {
        out.image[i] = static_cast<float>(std::clamp(c.px[i] + noise(rng), 0.0, 1.0));
    }
    if (out.quadrant >= 0) match_quadrant_moments(out.image, out.quadrant);

    const bool healthy = label == Label::Healthy;
    std::ostringstream path;
    path << "synthetic/" << (healthy ? "healthy" : "sick") << "/" << std::setw(6) << std::setfill('0') << index
         << ".png";
    out.record.path = path.str();
    out.record.stage_position = std::string("syn-") + (healthy ? "h" : "s") + "-" +
                                std::to_string(index / std::max<std::size_t>(1, spec.images_per_position));
    out.record.light_dose = healthy ? 0.0 : 200.0;
    out.record.frame_index = static_cast<int>(index % std::max<std::size_t>(1, spec.images_per_position));
    out.record.label = label;
    out.record.source = std::string(kSyntheticSource);
    return out;
}

std::vector<SyntheticImage> generate_synthetic(const SyntheticSpec& spec, Label label, std::size_t count,
                                               std::size_t first_index) {
    std::vector<SyntheticImage> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_synthetic_one(spec, label, first_index + i));
    return out;
}

}  // namespace deadnet
