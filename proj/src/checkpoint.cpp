// Checkpoint container:
//   "DEADNET1" | u32 version | u32 header length | header (JSON text) |
//   tensors as little-endian float32, layer by layer in spec order
//   (weights, bias, bn_scale, bn_shift, running_mean, running_var; absent
//   tensors skipped) | u32 CRC-32 of every byte after the magic.

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include "json.hpp"

#include "deadnet/model.hpp"

namespace deadnet {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_tensor(std::string& out, const Tensor& t) {
    for (float f : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

template <typename Layers, typename F>
void for_each_stored_tensor(Layers& layers, F&& f) {
    for (auto& p : layers) {
        for (auto* t : {&p.weights, &p.bias, &p.bn_scale, &p.bn_shift, &p.bn.running_mean, &p.bn.running_var}) {
            if (!t->empty()) f(*t);
        }
    }
}

std::uint32_t crc32_of(const unsigned char* data, std::size_t len) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; checkpoints can exceed 4 GiB only in theory
    while (len > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        len -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_checkpoint(const Network& network, const std::filesystem::path& path, std::uint64_t iteration,
                     std::uint64_t seed) {
    nlohmann::json header;
    header["spec"] = nlohmann::json::parse(network.spec().to_json());
    header["iteration"] = iteration;
    header["seed"] = seed;
    const std::string header_text = header.dump();

    std::string body;
    put_u32(body, kCheckpointVersion);
    put_u32(body, static_cast<std::uint32_t>(header_text.size()));
    body += header_text;
    for_each_stored_tensor(network.layers(), [&](const Tensor& t) { put_tensor(body, t); });
    const auto crc = crc32_of(reinterpret_cast<const unsigned char*>(body.data()), body.size());

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    std::string tail;
    put_u32(tail, crc);
    os.write(tail.data(), 4);
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 8 + 4 + 4 + 4 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw FormatError("not a DeadNet checkpoint (bad magic or truncated): " + path.string());
    }
    const std::size_t body_len = bytes.size() - 8 - 4;
    const std::uint32_t stored_crc = get_u32(raw + bytes.size() - 4);
    if (crc32_of(raw + 8, body_len) != stored_crc) {
        throw FormatError("checkpoint checksum mismatch (corrupt or truncated): " + path.string());
    }
    const std::uint32_t version = get_u32(raw + 8);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t header_len = get_u32(raw + 12);
    if (16 + static_cast<std::size_t>(header_len) > 8 + body_len) throw FormatError("checkpoint header overruns file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }
    Checkpoint ck{Network(NetworkSpec::from_json(header.at("spec").dump())), header.value("iteration", 0ull),
                  header.value("seed", 0ull)};

    std::size_t offset = 16 + header_len;
    const std::size_t end = 8 + body_len;
    for_each_stored_tensor(ck.network.layers(), [&](Tensor& t) {
        if (offset + 4 * t.size() > end) throw FormatError("checkpoint payload shorter than its spec");
        for (auto& f : t.data()) {
            f = std::bit_cast<float>(get_u32(raw + offset));
            offset += 4;
        }
    });
    if (offset != end) throw FormatError("checkpoint payload longer than its spec");
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected) {
    auto ck = load_checkpoint(path);
    const auto& got = ck.network.spec();
    const auto& got_shapes = ck.network.shapes();
    const auto want_shapes = expected.shapes();
    const std::size_t n = std::max(got.layers.size(), expected.layers.size());
    for (std::size_t i = 0; i < n; ++i) {
        const bool same = i < got.layers.size() && i < expected.layers.size() &&
                          got.layers[i] == expected.layers[i] && got_shapes[i].in == want_shapes[i].in &&
                          got_shapes[i].out == want_shapes[i].out;
        if (!same) {
            const std::string name = i < expected.layers.size() ? expected.layers[i].name : got.layers[i].name;
            throw ShapeError("checkpoint does not match expected network at layer " + std::to_string(i) + " (" +
                             name + ")");
        }
    }
    return ck;
}

}  // namespace deadnet
