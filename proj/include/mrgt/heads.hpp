#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mrgt/autograd.hpp"
#include "mrgt/datamodel.hpp"
#include "mrgt/nn.hpp"

namespace mrgt {

/// p = softmax(W_q * mean_rows(Z) + b_q).
struct ClassifierHead {
    std::size_t weight = 0;  // 2 x D
    std::size_t bias = 0;    // 1 x 2
};

ClassifierHead init_classifier(ParamStore& store, std::size_t width, Rng& rng);

/// Returns the 1x2 probability row [p_real, p_fake].
Var classify(Tape& tape, ParamStore& store, const ClassifierHead& head, Var fused);
std::array<double, 2> classify(const Matrix& fused, const Matrix& weight, const Matrix& bias);

/// -[(1-y) log p0 + y log p1] with probabilities clamped to [1e-12, 1-1e-12].
double bce_loss(std::array<double, 2> p, Label y);

struct DecoderConfig {
    std::size_t width = 32;
    std::size_t n_layers = 1;
    std::size_t n_heads = 4;
    std::size_t vocab_size = 64;
    std::size_t max_gen_len = 64;
    std::size_t ffn_mult = 4;
    /// Reuse the token embedding as output projection.
    bool tied_output = false;

    void validate() const;
};

struct DecoderLayer {
    nn::LayerNorm ln_self;
    nn::Attention self_attn;
    nn::LayerNorm ln_cross;
    nn::Attention cross_attn;
    nn::LayerNorm ln_ffn;
    nn::FeedForward ffn;
};

struct DecoderParams {
    std::size_t token_embedding = 0;  // shared with the encoder
    std::vector<DecoderLayer> layers;
    nn::LayerNorm ln_out;
    nn::Linear out;          // D -> vocab (untied)
    std::size_t out_bias = 0;  // 1 x vocab (tied)
};

DecoderParams init_decoder(ParamStore& store, const DecoderConfig& cfg, std::size_t token_embedding, Rng& rng);

/// Runs the decoder on an input prefix (starting with BOS) and returns one
/// probability row over the vocabulary per input position.
Var decoder_forward(Tape& tape, ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg, Var fused,
                    std::span<const TokenId> inputs);

/// Teacher forcing: inputs are BOS + gold[:-1]. `gold` must end with EOS.
Var decode_teacher_forced(Tape& tape, ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg, Var fused,
                          std::span<const TokenId> gold);

/// Mean over positions of -log(clamped probability of the gold token).
double gen_loss(const Matrix& distributions, std::span<const TokenId> gold);

struct LossWeights {
    double alpha1 = 0.2;
    double alpha2 = 0.8;
};

double joint_loss(double classification, double generation, const LossWeights& w);

/// Greedy decoding from BOS; argmax ties go to the lowest id. Stops at EOS
/// (not returned) or after `max_gen_len` tokens.
std::vector<TokenId> greedy_generate(ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg,
                                     const Matrix& fused, std::size_t max_gen_len);

} // namespace mrgt
