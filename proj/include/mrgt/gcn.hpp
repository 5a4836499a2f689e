#pragma once

#include <cstddef>
#include <vector>

#include "mrgt/autograd.hpp"
#include "mrgt/numcore.hpp"
#include "mrgt/rng.hpp"

namespace mrgt {

/// L square D x D weights, all in the `gcn` learning-rate group.
struct GcnStack {
    std::vector<std::size_t> weights;

    std::size_t layers() const noexcept { return weights.size(); }
};

/// Weights uniform(-1/sqrt(D), 1/sqrt(D)).
GcnStack init_gcn(ParamStore& store, std::size_t width, std::size_t layers, Rng& rng);

/// G_l = ReLU(A_norm * G_{l-1} * W_l), G_0 = H. Returns G_L.
Var gcn_forward(Tape& tape, ParamStore& store, const GcnStack& stack, Var encoded, const Matrix& normalized_adjacency);
Matrix gcn_forward(const Matrix& encoded, const Matrix& normalized_adjacency, const std::vector<Matrix>& weights);

/// Residual fusion Z = H + G_L.
Var fuse(Tape& tape, Var encoded, Var graph_out);
Matrix fuse(const Matrix& encoded, const Matrix& graph_out);

} // namespace mrgt
