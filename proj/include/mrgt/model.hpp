#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mrgt/ablation.hpp"
#include "mrgt/encoder.hpp"
#include "mrgt/gcn.hpp"
#include "mrgt/heads.hpp"
#include "mrgt/relgraph.hpp"

namespace mrgt {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
    GraphConfig graph;
    std::size_t gcn_layers = 2;
    std::uint64_t init_seed = 17;

    /// Sets the shared width/vocabulary fields on encoder and decoder.
    static ModelConfig make(std::size_t vocab_size, std::size_t frame_dim, std::size_t width = 32);
    void validate() const;
};

/// Everything a single forward pass produces. Vars live on the caller's tape.
struct ForwardResult {
    SequenceX sequence;
    MultimodalGraph graph;  // empty when the graph is ablated
    Var inputs;
    Var encoded;  // H
    Var fused;    // Z
    Var class_probs;
    Var token_probs;
    Var class_loss;
    Var gen_loss;
    Var loss;
};

struct Prediction {
    Label label = Label::real;
    std::array<double, 2> probs{};
    std::vector<TokenId> explanation;
};

/// Encoder -> relation graph -> GCN + residual fusion -> classifier and
/// explanation decoder.
class MrgtModel {
public:
    explicit MrgtModel(const ModelConfig& cfg);

    const ModelConfig& config() const noexcept { return cfg_; }
    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }
    const EncoderParams& encoder() const noexcept { return encoder_; }
    const GcnStack& gcn() const noexcept { return gcn_; }
    const ClassifierHead& classifier() const noexcept { return classifier_; }
    const DecoderParams& decoder() const noexcept { return decoder_; }

    /// With `fixed_graph` the relation graph is taken as given instead of
    /// being rebuilt from the current embeddings (gradient checks hold the
    /// topology fixed this way).
    ForwardResult forward(Tape& tape, const NewsVideoSample& sample, const AblationMask& ablation,
                          const LossWeights& weights, const MultimodalGraph* fixed_graph = nullptr);

    /// Graph over the sample's sequence in the current input-embedding space.
    MultimodalGraph graph_for(const NewsVideoSample& sample, const AblationMask& ablation);

    Prediction predict(const NewsVideoSample& sample, const AblationMask& ablation);

    std::string describe(const AblationMask& ablation) const;

private:
    ModelConfig cfg_;
    ParamStore params_;
    EncoderParams encoder_;
    GcnStack gcn_;
    ClassifierHead classifier_;
    DecoderParams decoder_;
};

} // namespace mrgt
