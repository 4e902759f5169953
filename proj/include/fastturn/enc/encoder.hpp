#pragma once

#include <cstdint>
#include <vector>

#include "fastturn/data/features.hpp"
#include "fastturn/nn/params.hpp"
#include "fastturn/nn/rng.hpp"
#include "fastturn/nn/tape.hpp"

namespace fastturn::enc {

// Chunked streaming conformer. Subsampling happens in a frontend of
// pointwise-then-depthwise stride-2 blocks (kernel 2, so chunk boundaries
// never split a window); each block then applies half-step FFN, chunk-windowed
// self-attention with a learned relative position bias, a causal depthwise
// convolution module, a second half-step FFN and a final layer norm.
struct EncoderConfig {
    int num_layers = 4;
    int num_heads = 4;
    int model_dim = 64;
    int conv_kernel = 8;
    int subsampling_factor = 4; // 1, 2 or 4
    int chunk_frames = 8;
    int left_context_chunks = 4;
    int mid_layer_index = 2; // 1-based tap for the acoustic adapter
    int feature_dim = 16;
    int ffn_mult = 2;
    int max_rel_dist = 12;

    void validate() const;
    int chunk_out() const { return chunk_frames / subsampling_factor; }
    int num_subsample_blocks() const;
};

// Fresh parameters under "encoder." (and nothing else); deterministic in the
// rng state.
void init_encoder_params(nn::ParameterSet& ps, const EncoderConfig& cfg, nn::Rng rng);

struct EncoderTaps {
    nn::Var top; // [T_out, model_dim]
    nn::Var mid; // [T_out, model_dim]
};

// Offline (whole-utterance) differentiable forward. Internally iterates the
// same chunk schedule as the streaming path, so the two agree on every output
// row; this is both the training path and the batched reference for the
// incremental-equivalence tests.
EncoderTaps encoder_forward(nn::Tape& tape, nn::ParamVars& pv, const EncoderConfig& cfg,
                            const data::FeatureMatrix& feats);

// Incremental inference path. encode_chunk consumes exactly chunk_frames
// frames, or fewer when flagged final; outputs for already-consumed chunks
// are never revised.
class StreamingEncoder {
public:
    StreamingEncoder(const nn::ParameterSet& params, const EncoderConfig& cfg);

    struct ChunkOut {
        nn::Tensor top; // [new_rows, model_dim]
        nn::Tensor mid;
    };

    ChunkOut encode_chunk(const double* frames, int n_frames, bool final_chunk);
    ChunkOut encode_chunk(const data::FeatureMatrix& frames, bool final_chunk);

    bool finalized() const { return finalized_; }
    long frames_consumed() const { return frames_consumed_; }
    int out_positions() const { return next_pos_; }

private:
    struct BlockCache {
        std::vector<double> kv_k;   // cached key rows, window-trimmed
        std::vector<double> kv_v;   // cached value rows
        std::vector<int> kv_pos;    // global output position per cached row
        std::vector<double> conv_tail; // last (conv_kernel-1) conv-input rows
    };

    const nn::ParameterSet* params_;
    EncoderConfig cfg_;
    std::vector<BlockCache> blocks_;
    bool finalized_ = false;
    long frames_consumed_ = 0;
    int next_pos_ = 0; // next global output position
};

} // namespace fastturn::enc
