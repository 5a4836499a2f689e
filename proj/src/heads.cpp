#include "mrgt/heads.hpp"

#include <algorithm>
#include <cmath>

#include "mrgt/errors.hpp"

namespace mrgt {

ClassifierHead init_classifier(ParamStore& store, std::size_t width, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    Matrix w(2, width);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    ClassifierHead h;
    h.weight = store.add("classifier.weight", std::move(w), LrGroup::backbone);
    h.bias = store.add("classifier.bias", Matrix(1, 2), LrGroup::backbone);
    return h;
}

Var classify(Tape& tape, ParamStore& store, const ClassifierHead& head, Var fused) {
    Var pooled = tape.mean_rows(fused);
    Var logits = tape.add_row(tape.matmul_bt(pooled, tape.param(store[head.weight])), tape.param(store[head.bias]));
    return tape.softmax_rows(logits);
}

std::array<double, 2> classify(const Matrix& fused, const Matrix& weight, const Matrix& bias) {
    Tape tape(false);
    Var pooled = tape.mean_rows(tape.constant(fused));
    Var logits = tape.add_row(tape.matmul_bt(pooled, tape.constant(weight)), tape.constant(bias));
    const Matrix& p = tape.value(tape.softmax_rows(logits));
    return {p(0, 0), p(0, 1)};
}

double bce_loss(std::array<double, 2> p, Label y) {
    constexpr double kClamp = 1e-12;
    const double p0 = std::clamp(p[0], kClamp, 1.0 - kClamp);
    const double p1 = std::clamp(p[1], kClamp, 1.0 - kClamp);
    const double yv = y == Label::fake ? 1.0 : 0.0;
    return -((1.0 - yv) * std::log(p0) + yv * std::log(p1));
}

void DecoderConfig::validate() const {
    if (width == 0 || n_heads == 0 || width % n_heads != 0)
        throw ValidationError("decoder", "width must be divisible by n_heads");
    if (max_gen_len < 1) throw ValidationError("decoder", "max_gen_len must be at least 1");
    if (vocab_size < kReservedTokens) throw ValidationError("decoder", "vocab_size below reserved count");
}

DecoderParams init_decoder(ParamStore& store, const DecoderConfig& cfg, std::size_t token_embedding, Rng& rng) {
    cfg.validate();
    DecoderParams p;
    p.token_embedding = token_embedding;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string name = "decoder." + std::to_string(l);
        DecoderLayer layer;
        layer.ln_self = nn::init_layer_norm(store, name + ".ln_self", cfg.width);
        layer.self_attn = nn::init_attention(store, name + ".self_attn", cfg.width, rng);
        layer.ln_cross = nn::init_layer_norm(store, name + ".ln_cross", cfg.width);
        layer.cross_attn = nn::init_attention(store, name + ".cross_attn", cfg.width, rng);
        layer.ln_ffn = nn::init_layer_norm(store, name + ".ln_ffn", cfg.width);
        layer.ffn = nn::init_feed_forward(store, name + ".ffn", cfg.width, cfg.width * cfg.ffn_mult, rng);
        p.layers.push_back(layer);
    }
    p.ln_out = nn::init_layer_norm(store, "decoder.ln_out", cfg.width);
    if (cfg.tied_output) {
        p.out_bias = store.add("decoder.out.bias", Matrix(1, cfg.vocab_size), LrGroup::backbone);
    } else {
        p.out = nn::init_linear(store, "decoder.out", cfg.width, cfg.vocab_size, rng);
    }
    return p;
}

Var decoder_forward(Tape& tape, ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg, Var fused,
                    std::span<const TokenId> inputs) {
    if (inputs.empty()) throw DimensionError("decoder_forward: empty input prefix");
    Var table = tape.param(store[p.token_embedding]);
    Var h = tape.add(tape.gather_rows(table, inputs), tape.constant(nn::sinusoidal_positions(inputs.size(), cfg.width)));
    for (const auto& layer : p.layers) {
        Var s = nn::layer_norm(tape, store, layer.ln_self, h);
        h = tape.add(h, nn::attention(tape, store, layer.self_attn, s, s, cfg.n_heads, true));
        Var c = nn::layer_norm(tape, store, layer.ln_cross, h);
        h = tape.add(h, nn::attention(tape, store, layer.cross_attn, c, fused, cfg.n_heads, false));
        h = tape.add(h, nn::feed_forward(tape, store, layer.ffn, nn::layer_norm(tape, store, layer.ln_ffn, h)));
    }
    h = nn::layer_norm(tape, store, p.ln_out, h);
    Var logits = cfg.tied_output
                     ? tape.add_row(tape.matmul_bt(h, tape.param(store[p.token_embedding])), tape.param(store[p.out_bias]))
                     : nn::linear(tape, store, p.out, h);
    return tape.softmax_rows(logits);
}

Var decode_teacher_forced(Tape& tape, ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg, Var fused,
                          std::span<const TokenId> gold) {
    if (gold.empty() || gold.back() != kEos) throw ValidationError("explanation", "gold sequence must end with EOS");
    if (gold.size() > cfg.max_gen_len) {
        throw DimensionError("decode_teacher_forced: gold length " + std::to_string(gold.size()) + " exceeds max_gen_len " +
                             std::to_string(cfg.max_gen_len));
    }
    std::vector<TokenId> inputs;
    inputs.reserve(gold.size());
    inputs.push_back(kBos);
    inputs.insert(inputs.end(), gold.begin(), gold.end() - 1);
    return decoder_forward(tape, store, p, cfg, fused, inputs);
}

double gen_loss(const Matrix& distributions, std::span<const TokenId> gold) {
    if (distributions.rows() != gold.size()) {
        throw DimensionError("gen_loss: " + std::to_string(distributions.rows()) + " distributions for " +
                             std::to_string(gold.size()) + " gold tokens");
    }
    if (gold.empty()) throw DimensionError("gen_loss: empty gold sequence");
    constexpr double kClamp = 1e-12;
    double total = 0.0;
    for (std::size_t t = 0; t < gold.size(); ++t) {
        if (gold[t] >= distributions.cols()) throw DimensionError("gen_loss: gold token outside vocabulary");
        total += -std::log(std::clamp(distributions(t, gold[t]), kClamp, 1.0 - kClamp));
    }
    return total / static_cast<double>(gold.size());
}

double joint_loss(double classification, double generation, const LossWeights& w) {
    return w.alpha1 * classification + w.alpha2 * generation;
}

std::vector<TokenId> greedy_generate(ParamStore& store, const DecoderParams& p, const DecoderConfig& cfg,
                                     const Matrix& fused, std::size_t max_gen_len) {
    std::vector<TokenId> prefix{kBos};
    std::vector<TokenId> out;
    while (out.size() < max_gen_len) {
        Tape tape(false);
        const Matrix& probs = tape.value(decoder_forward(tape, store, p, cfg, tape.constant(fused), prefix));
        auto last = probs.row(probs.rows() - 1);
        const auto best = static_cast<TokenId>(std::max_element(last.begin(), last.end()) - last.begin());
        if (best == kEos) break;
        out.push_back(best);
        prefix.push_back(best);
    }
    return out;
}

} // namespace mrgt
