#pragma once

#include <cmath>
#include <functional>

#include "mrgt/autograd.hpp"
#include "mrgt/numcore.hpp"
#include "mrgt/rng.hpp"

namespace testutil {

inline mrgt::Matrix random_matrix(std::size_t r, std::size_t c, mrgt::Rng& rng, double scale = 1.0) {
    mrgt::Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal() * scale;
    return m;
}

/// Max relative error between tape gradients and central differences for a
/// scalar built by `build` on a fresh tape.
inline double tape_grad_error(mrgt::ParamStore& store, const std::function<mrgt::Var(mrgt::Tape&)>& build) {
    store.zero_grad();
    {
        mrgt::Tape tape;
        tape.backward(build(tape));
    }
    auto f = [&] {
        mrgt::Tape tape(false);
        return tape.value(build(tape))(0, 0);
    };
    const mrgt::NumericGrad num = mrgt::finite_diff_grad(f, store);
    double worst = 0.0;
    for (std::size_t t = 0; t < store.size(); ++t)
        for (std::size_t e : num.checked[t])
            worst = std::max(worst, mrgt::relative_error(store[t].grad[e], num.grad[t][e]));
    return worst;
}

} // namespace testutil
