#include "mrgt/encoder.hpp"

#include "mrgt/errors.hpp"

namespace mrgt {

const char* to_string(SourceTag t) {
    switch (t) {
    case SourceTag::title: return "TITLE";
    case SourceTag::ocr: return "OCR";
    case SourceTag::frame: return "FRAME";
    case SourceTag::related: return "RELATED";
    }
    return "?";
}

std::size_t SequenceX::count(SourceTag t) const {
    std::size_t n = 0;
    for (const auto& p : positions) n += p.tag == t ? 1 : 0;
    return n;
}

SequenceX build_sequence(const NewsVideoSample& sample, const AblationMask& ablation) {
    SequenceX x;
    x.frames = sample.frames;
    if (!ablation.no_title)
        for (TokenId t : sample.title) x.positions.push_back({SourceTag::title, t, 0});
    if (!ablation.no_ocr)
        for (TokenId t : sample.ocr) x.positions.push_back({SourceTag::ocr, t, 0});
    if (!ablation.no_visual)
        for (std::size_t k = 0; k < sample.frames.rows(); ++k) x.positions.push_back({SourceTag::frame, k, 0});
    if (!ablation.no_related)
        for (std::size_t d = 0; d < sample.related.size(); ++d)
            for (TokenId t : sample.related[d]) x.positions.push_back({SourceTag::related, t, d});
    if (x.positions.empty()) throw DimensionError("build_sequence: every segment of sample " + sample.id + " is masked");
    return x;
}

void EncoderConfig::validate() const {
    if (width == 0 || n_heads == 0 || width % n_heads != 0)
        throw ValidationError("encoder", "width must be divisible by n_heads");
    if (vocab_size < kReservedTokens) throw ValidationError("encoder", "vocab_size below reserved count");
    if (frame_dim == 0) throw ValidationError("encoder", "frame_dim must be positive");
}

EncoderParams init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    EncoderParams p;
    Matrix tok(cfg.vocab_size, cfg.width);
    for (double& v : tok.data()) v = rng.normal();
    p.token_embedding = store.add("embed.tokens", std::move(tok), LrGroup::backbone);
    p.frame_proj = nn::init_linear(store, "embed.frame_proj", cfg.frame_dim, cfg.width, rng);
    Matrix tags(kSourceTags, cfg.width);
    for (double& v : tags.data()) v = rng.normal(0.0, 0.1);
    p.tag_embedding = store.add("embed.tags", std::move(tags), LrGroup::backbone);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string name = "encoder." + std::to_string(l);
        EncoderLayer layer;
        layer.ln_attn = nn::init_layer_norm(store, name + ".ln_attn", cfg.width);
        layer.attn = nn::init_attention(store, name + ".attn", cfg.width, rng);
        layer.ln_ffn = nn::init_layer_norm(store, name + ".ln_ffn", cfg.width);
        layer.ffn = nn::init_feed_forward(store, name + ".ffn", cfg.width, cfg.width * cfg.ffn_mult, rng);
        p.layers.push_back(layer);
    }
    return p;
}

EncoderOutput encode(Tape& tape, ParamStore& store, const EncoderParams& p, const EncoderConfig& cfg,
                     const SequenceX& x, bool keep_attention) {
    if (x.size() == 0) throw DimensionError("encode: empty sequence");
    if (x.count(SourceTag::frame) > 0 && x.frames.cols() != cfg.frame_dim) {
        throw DimensionError("encode: frame width " + std::to_string(x.frames.cols()) + " != D_in " +
                             std::to_string(cfg.frame_dim));
    }
    Var table = tape.param(store[p.token_embedding]);

    // Segments are contiguous, so the input rows are assembled run by run.
    std::vector<Var> runs;
    std::size_t i = 0;
    while (i < x.size()) {
        const bool frame = x.positions[i].tag == SourceTag::frame;
        std::size_t j = i;
        std::vector<std::size_t> items;
        while (j < x.size() && (x.positions[j].tag == SourceTag::frame) == frame) items.push_back(x.positions[j++].item);
        if (frame) {
            Matrix rows(items.size(), x.frames.cols());
            for (std::size_t r = 0; r < items.size(); ++r) {
                auto src = x.frames.row(items[r]);
                std::copy(src.begin(), src.end(), rows.row(r).begin());
            }
            runs.push_back(nn::linear(tape, store, p.frame_proj, tape.constant(std::move(rows))));
        } else {
            runs.push_back(tape.gather_rows(table, items));
        }
        i = j;
    }
    EncoderOutput out;
    out.inputs = runs.size() == 1 ? runs[0] : tape.concat_rows(runs);

    std::vector<std::size_t> tags(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) tags[k] = static_cast<std::size_t>(x.positions[k].tag);
    Var h = tape.add(out.inputs, tape.gather_rows(tape.param(store[p.tag_embedding]), tags));
    if (cfg.positional) h = tape.add(h, tape.constant(nn::sinusoidal_positions(x.size(), cfg.width)));

    for (const auto& layer : p.layers) {
        Var normed = nn::layer_norm(tape, store, layer.ln_attn, h);
        Var a = nn::attention(tape, store, layer.attn, normed, normed, cfg.n_heads, false,
                              keep_attention ? &out.attention : nullptr);
        h = tape.add(h, a);
        h = tape.add(h, nn::feed_forward(tape, store, layer.ffn, nn::layer_norm(tape, store, layer.ln_ffn, h)));
    }
    out.encoded = h;
    return out;
}

Matrix encode(const SequenceX& x, ParamStore& store, const EncoderParams& p, const EncoderConfig& cfg) {
    Tape tape(false);
    return tape.value(encode(tape, store, p, cfg, x).encoded);
}

} // namespace mrgt
