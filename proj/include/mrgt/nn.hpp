#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mrgt/autograd.hpp"
#include "mrgt/numcore.hpp"
#include "mrgt/rng.hpp"

// Transformer building blocks shared by the encoder and the explanation
// decoder. Parameters live in a ParamStore; the structs below hold indices.
namespace mrgt::nn {

struct Linear {
    std::size_t weight = 0;  // in x out
    std::size_t bias = 0;    // 1 x out
};

struct LayerNorm {
    std::size_t gain = 0;
    std::size_t bias = 0;
};

struct Attention {
    Linear q, k, v, out;
};

struct FeedForward {
    Linear up, down;
};

/// Weights uniform(-1/sqrt(in), 1/sqrt(in)), bias zero.
Linear init_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   LrGroup group = LrGroup::backbone);
LayerNorm init_layer_norm(ParamStore& store, const std::string& name, std::size_t width);
Attention init_attention(ParamStore& store, const std::string& name, std::size_t width, Rng& rng);
FeedForward init_feed_forward(ParamStore& store, const std::string& name, std::size_t width, std::size_t hidden,
                              Rng& rng);

Var linear(Tape& tape, ParamStore& store, const Linear& p, Var x);
Var layer_norm(Tape& tape, ParamStore& store, const LayerNorm& p, Var x);
Var feed_forward(Tape& tape, ParamStore& store, const FeedForward& p, Var x);

/// Multi-head scaled dot-product attention. Queries come from `query_in`,
/// keys and values from `kv_in`. When `weights` is non-null the per-head
/// attention matrices are appended to it.
Var attention(Tape& tape, ParamStore& store, const Attention& p, Var query_in, Var kv_in, std::size_t n_heads,
              bool causal, std::vector<Matrix>* weights = nullptr);

/// pe[pos][2i] = sin(pos / 10000^(2i/d)), pe[pos][2i+1] = cos(same).
Matrix sinusoidal_positions(std::size_t n, std::size_t d);

} // namespace mrgt::nn
