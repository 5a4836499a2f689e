#include "mrgt/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "mrgt/errors.hpp"

namespace mrgt {

Var Tape::push(Matrix value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = record_ && needs_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Matrix& Tape::grad_of(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::set_backward(Var out, std::function<void()> fn) {
    if (nodes_[out.id].needs_grad) nodes_[out.id].backward = std::move(fn);
}

Var Tape::constant(Matrix m) { return push(std::move(m), false); }

Var Tape::param(ParamTensor& p) {
    Var v = push(p.value, true);
    nodes_[v.id].param = &p;
    return v;
}

void Tape::backward(Var loss) {
    if (!record_) throw NumericError("backward on a non-recording tape");
    if (backward_done_) throw NumericError("backward called twice on the same tape");
    const Matrix& lv = nodes_[loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1) throw DimensionError("backward: loss must be 1x1, got " + lv.shape_str());
    backward_done_ = true;
    grad_of(loss)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backward) n.backward();
        if (n.param != nullptr) {
            Matrix& g = n.param->grad;
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
        }
    }
}

Var Tape::matmul(Var a, Var b) {
    Var out = push(mrgt::matmul(value(a), value(b)), needs(a) || needs(b));
    set_backward(out, [this, a, b, out] {
        const Matrix& g = nodes_[out.id].grad;
        if (needs(a)) {
            Matrix da = mrgt::matmul_bt(g, value(b));
            Matrix& ga = grad_of(a);
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += da[k];
        }
        if (needs(b)) {
            Matrix db = mrgt::matmul_at(value(a), g);
            Matrix& gb = grad_of(b);
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += db[k];
        }
    });
    return out;
}

Var Tape::matmul_bt(Var a, Var b) {
    Var out = push(mrgt::matmul_bt(value(a), value(b)), needs(a) || needs(b));
    set_backward(out, [this, a, b, out] {
        const Matrix& g = nodes_[out.id].grad;
        if (needs(a)) {
            Matrix da = mrgt::matmul(g, value(b));
            Matrix& ga = grad_of(a);
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += da[k];
        }
        if (needs(b)) {
            Matrix db = mrgt::matmul_at(g, value(a));
            Matrix& gb = grad_of(b);
            for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += db[k];
        }
    });
    return out;
}

Var Tape::add(Var a, Var b) {
    Var out = push(mrgt::add(value(a), value(b)), needs(a) || needs(b));
    set_backward(out, [this, a, b, out] {
        const Matrix& g = nodes_[out.id].grad;
        for (Var p : {a, b}) {
            if (!needs(p)) continue;
            Matrix& gp = grad_of(p);
            for (std::size_t k = 0; k < gp.size(); ++k) gp[k] += g[k];
        }
    });
    return out;
}

Var Tape::add_row(Var a, Var row) {
    const Matrix& av = value(a);
    const Matrix& rv = value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw DimensionError("add_row: cannot broadcast " + rv.shape_str() + " over " + av.shape_str());
    }
    Matrix o = av;
    for (std::size_t r = 0; r < o.rows(); ++r)
        for (std::size_t c = 0; c < o.cols(); ++c) o(r, c) += rv(0, c);
    Var out = push(std::move(o), needs(a) || needs(row));
    set_backward(out, [this, a, row, out] {
        const Matrix& g = nodes_[out.id].grad;
        if (needs(a)) {
            Matrix& ga = grad_of(a);
            for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k];
        }
        if (needs(row)) {
            Matrix& gr = grad_of(row);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
        }
    });
    return out;
}

Var Tape::scale(Var a, double s) {
    Matrix o = value(a);
    for (double& v : o.data()) v *= s;
    Var out = push(std::move(o), needs(a));
    set_backward(out, [this, a, s, out] {
        const Matrix& g = nodes_[out.id].grad;
        Matrix& ga = grad_of(a);
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += s * g[k];
    });
    return out;
}

Var Tape::relu(Var a) {
    Matrix o = value(a);
    for (double& v : o.data()) v = v > 0.0 ? v : 0.0;
    Var out = push(std::move(o), needs(a));
    set_backward(out, [this, a, out] {
        const Matrix& g = nodes_[out.id].grad;
        const Matrix& x = value(a);
        Matrix& ga = grad_of(a);
        for (std::size_t k = 0; k < ga.size(); ++k)
            if (x[k] > 0.0) ga[k] += g[k];
    });
    return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    const Matrix& xv = value(x);
    const std::size_t rows = xv.rows();
    const std::size_t cols = xv.cols();
    if (value(gain).rows() != 1 || value(gain).cols() != cols || !value(bias).same_shape(value(gain))) {
        throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(cols));
    }
    Matrix xhat(rows, cols);
    std::vector<double> inv_std(rows);
    Matrix o(rows, cols);
    const Matrix& gv = value(gain);
    const Matrix& bv = value(bias);
    for (std::size_t r = 0; r < rows; ++r) {
        auto in = xv.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            xhat(r, c) = (in[c] - mean) * inv_std[r];
            o(r, c) = xhat(r, c) * gv(0, c) + bv(0, c);
        }
    }
    Var out = push(std::move(o), needs(x) || needs(gain) || needs(bias));
    set_backward(out, [this, x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
        const Matrix& g = nodes_[out.id].grad;
        const Matrix& gv = value(gain);
        const std::size_t rows = g.rows();
        const std::size_t cols = g.cols();
        if (needs(gain) || needs(bias)) {
            Matrix& gg = grad_of(gain);
            Matrix& gb = grad_of(bias);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) {
                    if (needs(gain)) gg(0, c) += g(r, c) * xhat(r, c);
                    if (needs(bias)) gb(0, c) += g(r, c);
                }
        }
        if (needs(x)) {
            Matrix& gx = grad_of(x);
            const double n = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = g(r, c) * gv(0, c);
                    mean_d += d;
                    mean_dx += d * xhat(r, c);
                }
                mean_d /= n;
                mean_dx /= n;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = g(r, c) * gv(0, c);
                    gx(r, c) += inv_std[r] * (d - mean_d - xhat(r, c) * mean_dx);
                }
            }
        }
    });
    return out;
}

Var Tape::softmax_rows(Var a, bool causal) {
    const Matrix& av = value(a);
    Matrix o(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        const std::size_t limit = causal ? std::min(r + 1, av.cols()) : av.cols();
        auto in = av.row(r);
        double mx = in[0];
        for (std::size_t c = 1; c < limit; ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < limit; ++c) {
            o(r, c) = std::exp(in[c] - mx);
            sum += o(r, c);
        }
        for (std::size_t c = 0; c < limit; ++c) o(r, c) /= sum;
    }
    Var out = push(std::move(o), needs(a));
    set_backward(out, [this, a, out] {
        const Matrix& g = nodes_[out.id].grad;
        const Matrix& y = nodes_[out.id].value;
        Matrix& ga = grad_of(a);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
    return out;
}

Var Tape::gather_rows(Var table, std::span<const std::size_t> ids) {
    const Matrix& t = value(table);
    Matrix o(ids.size(), t.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= t.rows()) {
            throw DimensionError("gather_rows: id " + std::to_string(ids[r]) + " out of range for table " +
                                 t.shape_str());
        }
        std::copy(t.row(ids[r]).begin(), t.row(ids[r]).end(), o.row(r).begin());
    }
    Var out = push(std::move(o), needs(table));
    set_backward(out, [this, table, out, ids = std::vector<std::size_t>(ids.begin(), ids.end())] {
        const Matrix& g = nodes_[out.id].grad;
        Matrix& gt = grad_of(table);
        for (std::size_t r = 0; r < ids.size(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gt(ids[r], c) += g(r, c);
    });
    return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t cols = value(parts[0]).cols();
    std::size_t rows = 0;
    bool ng = false;
    for (Var p : parts) {
        if (value(p).cols() != cols) throw DimensionError("concat_rows: column mismatch " + value(p).shape_str());
        rows += value(p).rows();
        ng = ng || needs(p);
    }
    Matrix o(rows, cols);
    std::size_t at = 0;
    for (Var p : parts) {
        const Matrix& pv = value(p);
        std::copy(pv.data().begin(), pv.data().end(), o.data().begin() + static_cast<std::ptrdiff_t>(at * cols));
        at += pv.rows();
    }
    Var out = push(std::move(o), ng);
    set_backward(out, [this, out, parts = std::vector<Var>(parts.begin(), parts.end())] {
        const Matrix& g = nodes_[out.id].grad;
        std::size_t offset = 0;
        for (Var p : parts) {
            const std::size_t n = value(p).size();
            if (needs(p)) {
                Matrix& gp = grad_of(p);
                for (std::size_t k = 0; k < n; ++k) gp[k] += g[offset + k];
            }
            offset += n;
        }
    });
    return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    bool ng = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) throw DimensionError("concat_cols: row mismatch " + value(p).shape_str());
        cols += value(p).cols();
        ng = ng || needs(p);
    }
    Matrix o(rows, cols);
    std::size_t at = 0;
    for (Var p : parts) {
        const Matrix& pv = value(p);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pv.cols(); ++c) o(r, at + c) = pv(r, c);
        at += pv.cols();
    }
    Var out = push(std::move(o), ng);
    set_backward(out, [this, out, parts = std::vector<Var>(parts.begin(), parts.end())] {
        const Matrix& g = nodes_[out.id].grad;
        std::size_t at = 0;
        for (Var p : parts) {
            const std::size_t pc = value(p).cols();
            if (needs(p)) {
                Matrix& gp = grad_of(p);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, at + c);
            }
            at += pc;
        }
    });
    return out;
}

Var Tape::slice_cols(Var a, std::size_t first, std::size_t count) {
    const Matrix& av = value(a);
    if (first + count > av.cols()) throw DimensionError("slice_cols: range exceeds " + av.shape_str());
    Matrix o(av.rows(), count);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) o(r, c) = av(r, first + c);
    Var out = push(std::move(o), needs(a));
    set_backward(out, [this, a, first, count, out] {
        const Matrix& g = nodes_[out.id].grad;
        Matrix& ga = grad_of(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < count; ++c) ga(r, first + c) += g(r, c);
    });
    return out;
}

Var Tape::mean_rows(Var a) {
    const Matrix& av = value(a);
    if (av.rows() == 0) throw DimensionError("mean_rows: empty input");
    Matrix o(1, av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) o(0, c) += av(r, c);
    const double inv = 1.0 / static_cast<double>(av.rows());
    for (double& v : o.data()) v *= inv;
    Var out = push(std::move(o), needs(a));
    set_backward(out, [this, a, out, inv] {
        const Matrix& g = nodes_[out.id].grad;
        Matrix& ga = grad_of(a);
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) * inv;
    });
    return out;
}

Var Tape::mean_neg_log_prob(Var probs, std::span<const std::size_t> targets, double clamp) {
    const Matrix& p = value(probs);
    if (targets.size() != p.rows()) {
        throw DimensionError("mean_neg_log_prob: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(p.rows()) + " rows");
    }
    if (p.rows() == 0) throw DimensionError("mean_neg_log_prob: empty input");
    const double n = static_cast<double>(p.rows());
    double total = 0.0;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        if (targets[r] >= p.cols()) throw DimensionError("mean_neg_log_prob: target out of range");
        total += -std::log(std::clamp(p(r, targets[r]), clamp, 1.0 - clamp));
    }
    Var out = push(Matrix(1, 1, total / n), needs(probs));
    set_backward(out, [this, probs, out, clamp, n, t = std::vector<std::size_t>(targets.begin(), targets.end())] {
        const double g = nodes_[out.id].grad(0, 0);
        const Matrix& p = value(probs);
        Matrix& gp = grad_of(probs);
        for (std::size_t r = 0; r < t.size(); ++r) {
            const double pr = p(r, t[r]);
            if (pr > clamp && pr < 1.0 - clamp) gp(r, t[r]) += -g / (n * pr);
        }
    });
    return out;
}

Var Tape::sum_squares(Var a) {
    double s = 0.0;
    for (double v : value(a).data()) s += v * v;
    Var out = push(Matrix(1, 1, s), needs(a));
    set_backward(out, [this, a, out] {
        const double g = nodes_[out.id].grad(0, 0);
        const Matrix& x = value(a);
        Matrix& ga = grad_of(a);
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += 2.0 * g * x[k];
    });
    return out;
}

} // namespace mrgt
