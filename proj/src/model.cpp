#include "mrgt/model.hpp"

#include <sstream>

#include "mrgt/errors.hpp"

namespace mrgt {

ModelConfig ModelConfig::make(std::size_t vocab_size, std::size_t frame_dim, std::size_t width) {
    ModelConfig c;
    c.encoder.width = width;
    c.encoder.vocab_size = vocab_size;
    c.encoder.frame_dim = frame_dim;
    c.decoder.width = width;
    c.decoder.vocab_size = vocab_size;
    return c;
}

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.width != decoder.width) throw ValidationError("model", "encoder and decoder widths differ");
    if (encoder.vocab_size != decoder.vocab_size) throw ValidationError("model", "encoder and decoder vocabularies differ");
    if (gcn_layers < 1 || gcn_layers > 4) throw ValidationError("gcn_layers", "must be in [1, 4]");
}

MrgtModel::MrgtModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.init_seed);
    encoder_ = init_encoder(params_, cfg_.encoder, rng);
    gcn_ = init_gcn(params_, cfg_.encoder.width, cfg_.gcn_layers, rng);
    classifier_ = init_classifier(params_, cfg_.encoder.width, rng);
    decoder_ = init_decoder(params_, cfg_.decoder, encoder_.token_embedding, rng);
}

ForwardResult MrgtModel::forward(Tape& tape, const NewsVideoSample& sample, const AblationMask& ablation,
                                 const LossWeights& weights, const MultimodalGraph* fixed_graph) {
    ForwardResult r;
    r.sequence = build_sequence(sample, ablation);
    EncoderOutput enc = encode(tape, params_, encoder_, cfg_.encoder, r.sequence);
    r.inputs = enc.inputs;
    r.encoded = enc.encoded;
    if (ablation.no_graph) {
        r.fused = r.encoded;
    } else {
        r.graph = fixed_graph != nullptr ? *fixed_graph : build_graph(r.sequence, tape.value(r.inputs), cfg_.graph);
        Var g = gcn_forward(tape, params_, gcn_, r.encoded, r.graph.normalized);
        r.fused = fuse(tape, r.encoded, g);
    }
    r.class_probs = classify(tape, params_, classifier_, r.fused);
    const std::size_t label = static_cast<std::size_t>(sample.label);
    r.class_loss = tape.mean_neg_log_prob(r.class_probs, std::span<const std::size_t>(&label, 1));
    r.token_probs = decode_teacher_forced(tape, params_, decoder_, cfg_.decoder, r.fused, sample.explanation);
    r.gen_loss = tape.mean_neg_log_prob(r.token_probs, sample.explanation);
    r.loss = tape.add(tape.scale(r.class_loss, weights.alpha1), tape.scale(r.gen_loss, weights.alpha2));
    return r;
}

MultimodalGraph MrgtModel::graph_for(const NewsVideoSample& sample, const AblationMask& ablation) {
    Tape tape(false);
    const SequenceX x = build_sequence(sample, ablation);
    EncoderOutput enc = encode(tape, params_, encoder_, cfg_.encoder, x);
    return build_graph(x, tape.value(enc.inputs), cfg_.graph);
}

Prediction MrgtModel::predict(const NewsVideoSample& sample, const AblationMask& ablation) {
    Tape tape(false);
    const SequenceX x = build_sequence(sample, ablation);
    EncoderOutput enc = encode(tape, params_, encoder_, cfg_.encoder, x);
    Var fused = enc.encoded;
    if (!ablation.no_graph) {
        const MultimodalGraph g = build_graph(x, tape.value(enc.inputs), cfg_.graph);
        fused = fuse(tape, enc.encoded, gcn_forward(tape, params_, gcn_, enc.encoded, g.normalized));
    }
    const Matrix& p = tape.value(classify(tape, params_, classifier_, fused));
    Prediction out;
    out.probs = {p(0, 0), p(0, 1)};
    out.label = out.probs[1] > out.probs[0] ? Label::fake : Label::real;
    out.explanation = greedy_generate(params_, decoder_, cfg_.decoder, tape.value(fused), cfg_.decoder.max_gen_len);
    return out;
}

std::string MrgtModel::describe(const AblationMask& ablation) const {
    std::ostringstream os;
    os << ablation.describe() << ": D=" << cfg_.encoder.width << " encoder_layers=" << cfg_.encoder.n_layers
       << " heads=" << cfg_.encoder.n_heads << " decoder_layers=" << cfg_.decoder.n_layers << " vocab="
       << cfg_.encoder.vocab_size << " params=" << params_.scalar_count();
    if (ablation.no_graph) {
        os << " graph=disabled (Z = H)";
    } else {
        os << " graph=enabled gcn_layers=" << cfg_.gcn_layers << " tau_sem=" << cfg_.graph.tau_sem << " (Z = H + G_L)";
    }
    return os.str();
}

} // namespace mrgt
