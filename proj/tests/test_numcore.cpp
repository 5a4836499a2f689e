#include <doctest.h>

#include <cmath>

#include "mrgt/errors.hpp"
#include "mrgt/numcore.hpp"
#include "test_util.hpp"

using namespace mrgt;
using testutil::random_matrix;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

} // namespace

TEST_CASE("matmul identity and zero") {
    Rng rng(1);
    Matrix m = random_matrix(3, 4, rng);
    CHECK(matmul(Matrix::identity(3), m) == m);
    Matrix z = matmul(Matrix(2, 3), m);
    for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul variants agree with a triple loop") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng);
        CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
        CHECK(max_abs_diff(matmul_bt(a, transpose(b)), naive_matmul(a, b)) < 1e-12);
        CHECK(max_abs_diff(matmul_at(transpose(a), b), naive_matmul(a, b)) < 1e-12);
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    try {
        matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
    }
    CHECK_THROWS_AS(add(Matrix(1, 2), Matrix(2, 1)), DimensionError);
}

TEST_CASE("softmax rows") {
    Matrix s = softmax_rows(Matrix::from_rows({{0, 0}}));
    CHECK(s(0, 0) == doctest::Approx(0.5));
    CHECK(s(0, 1) == doctest::Approx(0.5));

    Matrix r = softmax_rows(Matrix::from_rows({{1, 2, 3}}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(r(0, j) - std::exp(j + 1.0) / z) < 1e-12);

    Matrix big = softmax_rows(Matrix::from_rows({{1000, 1000, -1000}}));
    CHECK(all_finite(big));
    CHECK(big(0, 0) == doctest::Approx(0.5));

    Rng rng(3);
    Matrix m = softmax_rows(random_matrix(5, 7, rng, 10.0));
    for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (double v : m.row(i)) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("cosine similarity") {
    const std::vector<double> v{1.0, -2.0, 0.5}, zero{0, 0, 0};
    CHECK(cosine_sim(v, v) == doctest::Approx(1.0));
    const std::vector<double> x{1, 0}, y{0, 1};
    CHECK(cosine_sim(x, y) == 0.0);
    CHECK(cosine_sim(zero, v) == 0.0);
    CHECK_THROWS_AS(cosine_sim(x, v), DimensionError);

    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(6), b(6);
        for (auto& e : a) e = rng.normal();
        for (auto& e : b) e = rng.normal();
        double dot = 0, na = 0, nb = 0;
        for (int i = 0; i < 6; ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        const double c = cosine_sim(a, b);
        CHECK(std::abs(c - dot / std::sqrt(na * nb)) < 1e-12);
        CHECK(std::abs(c) <= 1.0);
    }
}

TEST_CASE("param store") {
    ParamStore store;
    CHECK(store.add("a", Matrix(2, 2), LrGroup::backbone) == 0);
    CHECK(store.add("b", Matrix(1, 3), LrGroup::gcn) == 1);
    CHECK_THROWS_AS(store.add("a", Matrix(1, 1), LrGroup::gcn), ValidationError);
    CHECK(store.scalar_count() == 7);
    CHECK(store.at("b").lr_group == LrGroup::gcn);
    CHECK(store.index_of("b") == 1);
    CHECK_FALSE(store.contains("c"));
}

TEST_CASE("finite differences") {
    ParamStore store;
    store.add("theta", Matrix(1, 1, 3.0), LrGroup::backbone);
    auto sq = [&] { return store[0].value[0] * store[0].value[0]; };
    NumericGrad g = finite_diff_grad(sq, store);
    CHECK(std::abs(g.grad[0][0] - 6.0) < 1e-7);
    CHECK(store[0].value[0] == 3.0);

    store.add("w", Matrix(2, 3, 1.5), LrGroup::backbone);
    NumericGrad c = finite_diff_grad([] { return 4.0; }, store);
    for (const auto& m : c.grad)
        for (double v : m.data()) CHECK(v == 0.0);

    CHECK_THROWS_AS(finite_diff_grad([] { return std::nan(""); }, store), NumericError);
}

TEST_CASE("finite differences subsample large tensors") {
    ParamStore store;
    store.add("w", Matrix(10, 10, 1.0), LrGroup::backbone);
    FiniteDiffOptions opts;
    opts.max_entries_per_tensor = 7;
    NumericGrad g = finite_diff_grad([&] { return store[0].value[0]; }, store, opts);
    CHECK(g.checked[0].size() == 7);
}

TEST_CASE("relative error floor") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-20, -1e-20) < 1e-13);
}
