#pragma once

#include <array>
#include <string>
#include <vector>

#include "fastturn/config.hpp"
#include "fastturn/ctc/ctc.hpp"
#include "fastturn/data/manifest.hpp"

namespace fastturn {

enum class EngineMode { Cascaded, Semantic, Unified };

EngineMode engine_mode_from_string(const std::string& s);
const char* to_string(EngineMode m);

// All parameters plus the configs that shape them. Read-only after
// construction from the inference side; the training pipeline mutates params
// through the optimizer only.
struct Engine {
    EngineConfig cfg;
    lm::Vocab vocab;
    nn::ParameterSet params;

    static Engine init(EngineConfig cfg);
    static Engine with_params(EngineConfig cfg, nn::ParameterSet params);

    struct Encoded {
        nn::Tensor top;
        nn::Tensor mid;
    };

    // offline whole-utterance encode (same chunk schedule as streaming)
    Encoded encode(const data::FeatureMatrix& feats) const;
    // [T, V+1] log-probabilities from the CTC head
    nn::Tensor ctc_log_probs(const nn::Tensor& top) const;
    std::vector<int> greedy_transcript(const nn::Tensor& top) const;
    // LLM adapter applied to top hidden states
    nn::Tensor llm_prefix(const nn::Tensor& top) const;
    lm::TurnPrediction predict(const std::vector<int>& prompt, const nn::Tensor* prefix) const;
    nn::Tensor acoustic_vec(const nn::Tensor& mid) const; // zeros vector when mid is empty
    std::array<double, 4> detect(const nn::Tensor& acoustic, const nn::Tensor& lm_hidden) const;
    std::vector<int> decode_asr(const nn::Tensor& prefix, int max_len) const;

    int fusion_dim() const { return cfg.acoustic_adapter.model_dim + cfg.lm.model_dim; }
};

struct Decision {
    data::TurnState state = data::TurnState::Complete;
    double confidence = 0.0;
    std::array<double, 4> probs{};
};

// The per-mode decision path over accumulated evidence. Cascaded reads the
// transcript alone; Semantic adds the adapted acoustic prefix; Unified runs
// the fusion detector over the mid-layer tap and the LM hidden state.
Decision decide(const Engine& eng, EngineMode mode, const nn::Tensor& top, const nn::Tensor& mid,
                const std::vector<int>& transcript);

} // namespace fastturn
