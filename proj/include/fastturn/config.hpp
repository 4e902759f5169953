#pragma once

#include <map>
#include <string>

#include "fastturn/data/synth.hpp"
#include "fastturn/enc/encoder.hpp"
#include "fastturn/fusion/fusion.hpp"
#include "fastturn/lm/lm.hpp"
#include "fastturn/pipeline/schedule.hpp"

namespace fastturn {

struct DuplexConfig {
    double tau = 0.9;        // early-exit confidence threshold
    int k_consecutive = 2;   // confident chunk evaluations needed to commit
    void validate() const;
};

struct PathsConfig {
    std::string train_manifest = "corpus/train/manifest.jsonl";
    std::string test_manifest = "corpus/test/manifest.jsonl";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";
};

// The one declarative config file behind every CLI command. Parsing is
// strict: unknown keys anywhere are rejected.
struct EngineConfig {
    enc::EncoderConfig encoder;
    lm::LmConfig lm; // vocab_size derived from synth.vocab_size
    lm::LlmAdapterConfig llm_adapter;
    fusion::AcousticAdapterConfig acoustic_adapter;
    fusion::DetectorConfig detector;
    pipeline::TrainConfig training;
    DuplexConfig duplex;
    data::SynthConfig synth;
    PathsConfig paths;
    std::map<std::string, std::string> notes; // free-form documentation

    int content_tokens() const { return synth.vocab_size - 1; }

    void validate();
    static EngineConfig from_json_text(const std::string& text, const std::string& origin = "config");
    static EngineConfig from_file(const std::string& path);
    std::string to_json_text() const;
};

} // namespace fastturn
