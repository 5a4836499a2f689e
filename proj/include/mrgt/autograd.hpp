#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mrgt/numcore.hpp"

namespace mrgt {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode differentiation over dense matrices.
///
/// Every forward computation in the model goes through a Tape. A tape built
/// with `record = false` skips the backward closures, which is what inference
/// uses. Parameter leaves accumulate into ParamTensor::grad on backward().
class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix m);
    Var param(ParamTensor& p);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool recording() const noexcept { return record_; }

    /// Seeds d(loss)/d(loss) = 1 for a 1x1 `loss` and runs the closures in
    /// reverse. Each tape supports one backward pass.
    void backward(Var loss);

    Var matmul(Var a, Var b);
    /// a * b^T
    Var matmul_bt(Var a, Var b);
    Var add(Var a, Var b);
    /// Broadcasts the 1xN `row` over every row of `a`.
    Var add_row(Var a, Var row);
    Var scale(Var a, double s);
    Var relu(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    /// With `causal`, entry (i, j) for j > i gets probability zero.
    Var softmax_rows(Var a, bool causal = false);
    Var gather_rows(Var table, std::span<const std::size_t> ids);
    Var concat_rows(std::span<const Var> parts);
    Var concat_cols(std::span<const Var> parts);
    Var slice_cols(Var a, std::size_t first, std::size_t count);
    Var mean_rows(Var a);
    /// Mean over rows of -log(clamp(p[r][target_r])), probabilities clamped to
    /// [clamp, 1 - clamp]. Returns 1x1.
    Var mean_neg_log_prob(Var probs, std::span<const std::size_t> targets, double clamp = 1e-12);
    Var sum_squares(Var a);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        ParamTensor* param = nullptr;
        std::function<void()> backward;
    };

    Var push(Matrix value, bool needs_grad);
    bool needs(Var v) const { return nodes_[v.id].needs_grad; }
    Matrix& grad_of(Var v);
    void set_backward(Var out, std::function<void()> fn);

    bool record_;
    bool backward_done_ = false;
    std::vector<Node> nodes_;
};

} // namespace mrgt
