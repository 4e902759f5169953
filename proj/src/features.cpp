#include "fastturn/data/features.hpp"

#include <cstring>
#include <fstream>

#include "fastturn/common.hpp"

namespace fastturn::data {

FeatureMatrix FeatureMatrix::prefix(int f) const {
    FeatureMatrix out;
    out.num_frames = f;
    out.dim = dim;
    out.frame_period_ms = frame_period_ms;
    out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(f) * dim);
    return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& b;
    std::size_t pos = 0;
    std::string origin;

    void need(std::size_t n, const char* what) {
        if (pos + n > b.size()) throw IoError(origin + ": truncated feature file (" + what + ")");
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 4;
        return x;
    }

    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
};

} // namespace

std::vector<std::uint8_t> features_to_bytes(const FeatureMatrix& m) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + m.values.size() * 4);
    out.push_back('F');
    out.push_back('T');
    out.push_back('F');
    out.push_back('E');
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(m.num_frames));
    put_u32(out, static_cast<std::uint32_t>(m.dim));
    put_f32(out, static_cast<float>(m.frame_period_ms));
    for (double v : m.values) put_f32(out, static_cast<float>(v));
    return out;
}

FeatureMatrix features_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    Reader r{bytes, 0, origin.empty() ? std::string("features") : origin};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "FTFE", 4) != 0) throw IoError(r.origin + ": bad magic");
    r.pos = 4;
    const std::uint32_t version = r.u32("version");
    if (version != 1) throw IoError(r.origin + ": unsupported version " + std::to_string(version));
    FeatureMatrix m;
    m.num_frames = static_cast<int>(r.u32("num_frames"));
    m.dim = static_cast<int>(r.u32("dim"));
    if (m.dim < 1 && m.num_frames > 0) throw IoError(r.origin + ": dim mismatch with declared frames");
    m.frame_period_ms = static_cast<double>(r.f32("frame_period_ms"));
    const std::size_t count = static_cast<std::size_t>(m.num_frames) * static_cast<std::size_t>(m.dim);
    r.need(count * 4, "payload");
    m.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) m.values[i] = static_cast<double>(r.f32("payload"));
    if (r.pos != bytes.size()) throw IoError(r.origin + ": trailing bytes after payload");
    return m;
}

void write_features(const std::string& path, const FeatureMatrix& m) {
    const auto bytes = features_to_bytes(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

FeatureMatrix read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return features_from_bytes(bytes, path);
}

} // namespace fastturn::data
