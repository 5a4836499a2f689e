#include "mrgt/gcn.hpp"

#include <cmath>

#include "mrgt/errors.hpp"

namespace mrgt {

GcnStack init_gcn(ParamStore& store, std::size_t width, std::size_t layers, Rng& rng) {
    GcnStack stack;
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix w(width, width);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        stack.weights.push_back(store.add("gcn." + std::to_string(l) + ".weight", std::move(w), LrGroup::gcn));
    }
    return stack;
}

namespace {

void check_shapes(const Matrix& h, const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() != h.rows()) {
        throw DimensionError("gcn_forward: adjacency " + a.shape_str() + " does not match node matrix " + h.shape_str());
    }
}

} // namespace

Var gcn_forward(Tape& tape, ParamStore& store, const GcnStack& stack, Var encoded,
                const Matrix& normalized_adjacency) {
    check_shapes(tape.value(encoded), normalized_adjacency);
    Var adj = tape.constant(normalized_adjacency);
    Var g = encoded;
    for (std::size_t w : stack.weights) g = tape.relu(tape.matmul(tape.matmul(adj, g), tape.param(store[w])));
    return g;
}

Matrix gcn_forward(const Matrix& encoded, const Matrix& normalized_adjacency, const std::vector<Matrix>& weights) {
    check_shapes(encoded, normalized_adjacency);
    Matrix g = encoded;
    for (const auto& w : weights) {
        g = matmul(matmul(normalized_adjacency, g), w);
        for (double& v : g.data()) v = v > 0.0 ? v : 0.0;
    }
    return g;
}

Var fuse(Tape& tape, Var encoded, Var graph_out) { return tape.add(encoded, graph_out); }

Matrix fuse(const Matrix& encoded, const Matrix& graph_out) {
    if (!encoded.same_shape(graph_out)) {
        throw DimensionError("fuse: shapes " + encoded.shape_str() + " and " + graph_out.shape_str());
    }
    return add(encoded, graph_out);
}

} // namespace mrgt
