#pragma once

#include <string>

#include "fastturn/nn/params.hpp"
#include "fastturn/nn/rng.hpp"
#include "fastturn/nn/tape.hpp"

namespace fastturn::nn {

// Plain pre-norm transformer stack (causal self-attention + swish FFN) shared
// by the language model and both adapters. Position information, when any, is
// added by the caller before the stack.
struct TransformerDims {
    int num_layers = 2;
    int num_heads = 4;
    int model_dim = 64;
    int ffn_mult = 2;
    // learned relative position bias per head (clamped at max_rel); when off
    // the stack is position-free
    bool relative_pos = false;
    int max_rel = 24;
};

// Parameters under prefix: block{i}.{ln1.g,ln1.b,attn.wq..bo,ln2.g,ln2.b,
// ffn.w1,b1,w2,b2} plus ln_f.{g,b}; with relative_pos also
// block{i}.attn.relbias.
void init_transformer_params(ParameterSet& ps, const std::string& prefix, const TransformerDims& dims,
                             Rng& rng);

// x: [n, model_dim]; returns [n, model_dim] after the final norm. n may be 0.
Var transformer_forward(Tape& t, ParamVars& pv, const std::string& prefix, const TransformerDims& dims,
                        Var x);

} // namespace fastturn::nn
