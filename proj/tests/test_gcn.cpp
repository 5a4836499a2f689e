#include <doctest.h>

#include "mrgt/errors.hpp"
#include "mrgt/gcn.hpp"
#include "mrgt/relgraph.hpp"
#include "test_util.hpp"

using namespace mrgt;
using testutil::random_matrix;

TEST_CASE("identity propagation keeps a non-negative H") {
    Rng rng(1);
    Matrix h = random_matrix(4, 3, rng);
    for (double& v : h.data()) v = std::abs(v);
    std::vector<Matrix> w{Matrix::identity(3), Matrix::identity(3)};
    CHECK(gcn_forward(h, Matrix::identity(4), w) == h);
}

TEST_CASE("zero input stays zero") {
    Rng rng(2);
    Matrix a = random_matrix(4, 4, rng);
    std::vector<Matrix> w{random_matrix(3, 3, rng), random_matrix(3, 3, rng)};
    const Matrix g = gcn_forward(Matrix(4, 3), a, w);
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("two-layer stack matches a loop oracle") {
    Rng rng(3);
    const std::size_t s = 4, d = 3;
    Matrix h = random_matrix(s, d, rng), a = random_matrix(s, s, rng);
    std::vector<Matrix> w{random_matrix(d, d, rng), random_matrix(d, d, rng)};
    Matrix g = h;
    for (const Matrix& wl : w) {
        Matrix ag(s, d), next(s, d);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t c = 0; c < d; ++c)
                for (std::size_t k = 0; k < s; ++k) ag(i, c) += a(i, k) * g(k, c);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t c = 0; c < d; ++c) {
                double v = 0.0;
                for (std::size_t k = 0; k < d; ++k) v += ag(i, k) * wl(k, c);
                next(i, c) = v > 0.0 ? v : 0.0;
            }
        g = next;
    }
    CHECK(max_abs_diff(gcn_forward(h, a, w), g) < 1e-12);
    for (double v : g.data()) CHECK(v >= 0.0);
}

TEST_CASE("fusion identities") {
    Rng rng(4);
    Matrix h = random_matrix(3, 2, rng), g = random_matrix(3, 2, rng);
    CHECK(fuse(h, Matrix(3, 2)) == h);
    CHECK(fuse(Matrix(3, 2), g) == g);
    Matrix z = fuse(h, g);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] - h[i] == doctest::Approx(g[i]).epsilon(1e-15));
    CHECK_THROWS_AS(fuse(h, Matrix(2, 2)), DimensionError);
    CHECK_THROWS_AS(gcn_forward(h, Matrix::identity(2), {Matrix::identity(2)}), DimensionError);
}

TEST_CASE("tape and matrix forward agree, weights are in the gcn group") {
    Rng rng(5);
    ParamStore store;
    GcnStack stack = init_gcn(store, 4, 2, rng);
    CHECK(stack.layers() == 2);
    for (const auto& p : store) {
        CHECK(p.lr_group == LrGroup::gcn);
        for (double v : p.value.data()) CHECK(std::abs(v) <= 0.5);
    }
    Matrix h = random_matrix(6, 4, rng), a = random_matrix(6, 6, rng);
    Tape t(false);
    Var out = gcn_forward(t, store, stack, t.constant(h), a);
    CHECK(max_abs_diff(t.value(out), gcn_forward(h, a, {store[0].value, store[1].value})) < 1e-12);
}

TEST_CASE("gcn and fusion gradient") {
    Rng rng(6);
    ParamStore store;
    const std::size_t h_idx = store.add("h", random_matrix(6, 4, rng), LrGroup::backbone);
    GcnStack stack = init_gcn(store, 4, 2, rng);
    Matrix a(6, 6);
    for (std::size_t i = 0; i < 6; ++i) {
        a(i, i) = 1.0;
        if (i + 1 < 6) a(i, i + 1) = a(i + 1, i) = 1.0;
    }
    const Matrix an = normalize_adjacency(a);
    const double err = testutil::tape_grad_error(store, [&](Tape& t) {
        Var h = t.param(store[h_idx]);
        return t.sum_squares(fuse(t, h, gcn_forward(t, store, stack, h, an)));
    });
    CHECK(err < 1e-3);
}
