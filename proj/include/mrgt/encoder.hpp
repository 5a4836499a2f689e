#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mrgt/ablation.hpp"
#include "mrgt/autograd.hpp"
#include "mrgt/datamodel.hpp"
#include "mrgt/nn.hpp"

namespace mrgt {

/// Node category of a sequence position.
enum class SourceTag : std::uint8_t { title = 0, ocr = 1, frame = 2, related = 3 };
inline constexpr std::size_t kSourceTags = 4;
const char* to_string(SourceTag t);

struct SequencePosition {
    SourceTag tag = SourceTag::title;
    /// Token id for text positions, frame row for FRAME positions.
    std::size_t item = 0;
    /// Related-document index (RELATED positions only).
    std::size_t doc = 0;
};

/// The concatenated multimodal sequence: title, OCR, frames, related docs.
struct SequenceX {
    std::vector<SequencePosition> positions;
    /// Frame features of the source sample (K x D_in); FRAME positions index it.
    Matrix frames;

    std::size_t size() const noexcept { return positions.size(); }
    std::size_t count(SourceTag t) const;
};

SequenceX build_sequence(const NewsVideoSample& sample, const AblationMask& ablation = {});

struct EncoderConfig {
    std::size_t width = 32;  // D
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t frame_dim = 16;  // D_in
    std::size_t max_text_len = 224;
    std::size_t max_frames = 80;
    std::size_t vocab_size = 64;
    std::size_t ffn_mult = 4;
    /// Sinusoidal positions are added unless switched off (used by tests).
    bool positional = true;

    void validate() const;
};

struct EncoderLayer {
    nn::LayerNorm ln_attn;
    nn::Attention attn;
    nn::LayerNorm ln_ffn;
    nn::FeedForward ffn;
};

struct EncoderParams {
    std::size_t token_embedding = 0;  // vocab x D, shared with the decoder
    nn::Linear frame_proj;            // D_in -> D
    std::size_t tag_embedding = 0;    // 4 x D
    std::vector<EncoderLayer> layers;
};

EncoderParams init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

struct EncoderOutput {
    /// Per-position input vectors before positions/tags are added (token
    /// embedding or projected frame). The relation graph is built in this space.
    Var inputs;
    Var encoded;  // H, S x D
    /// Every attention matrix, layer-major then head.
    std::vector<Matrix> attention;
};

EncoderOutput encode(Tape& tape, ParamStore& store, const EncoderParams& p, const EncoderConfig& cfg,
                     const SequenceX& x, bool keep_attention = false);

/// Inference-only convenience returning H.
Matrix encode(const SequenceX& x, ParamStore& store, const EncoderParams& p, const EncoderConfig& cfg);

} // namespace mrgt
