#pragma once

#include <string>
#include <vector>

namespace fastturn::data {

// Frame-level acoustic features, the engine's sole audio-side input.
struct FeatureMatrix {
    int num_frames = 0;
    int dim = 0;
    double frame_period_ms = 10.0;
    std::vector<double> values; // num_frames x dim, row-major

    double& at(int f, int d) { return values[static_cast<std::size_t>(f) * dim + d]; }
    double at(int f, int d) const { return values[static_cast<std::size_t>(f) * dim + d]; }
    double* frame(int f) { return values.data() + static_cast<std::size_t>(f) * dim; }
    const double* frame(int f) const { return values.data() + static_cast<std::size_t>(f) * dim; }

    double duration_ms() const { return num_frames * frame_period_ms; }

    // rows [0, f) as a copy
    FeatureMatrix prefix(int f) const;
};

// "FTFE" feature file: magic, u32 version=1, u32 num_frames, u32 dim,
// f32 frame_period_ms, then num_frames*dim f32 values, little-endian,
// row-major.
void write_features(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_features(const std::string& path);

std::vector<std::uint8_t> features_to_bytes(const FeatureMatrix& m);
FeatureMatrix features_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& origin = "");

} // namespace fastturn::data
