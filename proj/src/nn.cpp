#include "mrgt/nn.hpp"

#include <cmath>

#include "mrgt/errors.hpp"

namespace mrgt::nn {

Linear init_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   LrGroup group) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(in, out);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    Linear l;
    l.weight = store.add(name + ".weight", std::move(w), group);
    l.bias = store.add(name + ".bias", Matrix(1, out), group);
    return l;
}

LayerNorm init_layer_norm(ParamStore& store, const std::string& name, std::size_t width) {
    LayerNorm ln;
    ln.gain = store.add(name + ".gain", Matrix(1, width, 1.0), LrGroup::backbone);
    ln.bias = store.add(name + ".bias", Matrix(1, width), LrGroup::backbone);
    return ln;
}

Attention init_attention(ParamStore& store, const std::string& name, std::size_t width, Rng& rng) {
    Attention a;
    a.q = init_linear(store, name + ".q", width, width, rng);
    a.k = init_linear(store, name + ".k", width, width, rng);
    a.v = init_linear(store, name + ".v", width, width, rng);
    a.out = init_linear(store, name + ".out", width, width, rng);
    return a;
}

FeedForward init_feed_forward(ParamStore& store, const std::string& name, std::size_t width, std::size_t hidden,
                              Rng& rng) {
    FeedForward f;
    f.up = init_linear(store, name + ".up", width, hidden, rng);
    f.down = init_linear(store, name + ".down", hidden, width, rng);
    return f;
}

Var linear(Tape& tape, ParamStore& store, const Linear& p, Var x) {
    Var w = tape.param(store[p.weight]);
    Var b = tape.param(store[p.bias]);
    return tape.add_row(tape.matmul(x, w), b);
}

Var layer_norm(Tape& tape, ParamStore& store, const LayerNorm& p, Var x) {
    return tape.layer_norm(x, tape.param(store[p.gain]), tape.param(store[p.bias]));
}

Var feed_forward(Tape& tape, ParamStore& store, const FeedForward& p, Var x) {
    return linear(tape, store, p.down, tape.relu(linear(tape, store, p.up, x)));
}

Var attention(Tape& tape, ParamStore& store, const Attention& p, Var query_in, Var kv_in, std::size_t n_heads,
              bool causal, std::vector<Matrix>* weights) {
    const std::size_t width = tape.value(query_in).cols();
    if (n_heads == 0 || width % n_heads != 0) {
        throw DimensionError("attention: width " + std::to_string(width) + " not divisible by " +
                             std::to_string(n_heads) + " heads");
    }
    const std::size_t head = width / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head));
    Var q = linear(tape, store, p.q, query_in);
    Var k = linear(tape, store, p.k, kv_in);
    Var v = linear(tape, store, p.v, kv_in);
    std::vector<Var> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        Var qh = tape.slice_cols(q, h * head, head);
        Var kh = tape.slice_cols(k, h * head, head);
        Var vh = tape.slice_cols(v, h * head, head);
        Var probs = tape.softmax_rows(tape.scale(tape.matmul_bt(qh, kh), scale), causal);
        if (weights != nullptr) weights->push_back(tape.value(probs));
        heads.push_back(tape.matmul(probs, vh));
    }
    Var merged = n_heads == 1 ? heads[0] : tape.concat_cols(heads);
    return linear(tape, store, p.out, merged);
}

Matrix sinusoidal_positions(std::size_t n, std::size_t d) {
    Matrix pe(n, d);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double angle =
                static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe(pos, i) = std::sin(angle);
            if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

} // namespace mrgt::nn
