#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mrgt/errors.hpp"
#include "mrgt/heads.hpp"
#include "test_util.hpp"

using namespace mrgt;
using testutil::random_matrix;

namespace {

struct DecoderFixture {
    Rng rng{31};
    DecoderConfig cfg;
    ParamStore store;
    DecoderParams p;
    Matrix z;

    explicit DecoderFixture(bool tied = false) {
        cfg.width = 8;
        cfg.n_heads = 2;
        cfg.vocab_size = 12;
        cfg.ffn_mult = 2;
        cfg.max_gen_len = 10;
        cfg.tied_output = tied;
        const std::size_t emb = store.add("embed.tokens", random_matrix(cfg.vocab_size, cfg.width, rng), LrGroup::backbone);
        p = init_decoder(store, cfg, emb, rng);
        z = random_matrix(5, cfg.width, rng);
    }

    Matrix run(const std::vector<TokenId>& inputs) {
        Tape t(false);
        return t.value(decoder_forward(t, store, p, cfg, t.constant(z), inputs));
    }
    Matrix& out_bias() { return store.at("decoder.out.bias").value; }
};

} // namespace

TEST_CASE("classifier examples") {
    CHECK(classify(Matrix(3, 4), Matrix(2, 4), Matrix(1, 2)) == std::array<double, 2>{0.5, 0.5});
    auto sat = classify(Matrix(3, 4), Matrix(2, 4), Matrix::from_rows({{10, -10}}));
    CHECK(sat[0] > 0.9999);

    Rng rng(1);
    Matrix z = random_matrix(5, 4, rng), w = random_matrix(2, 4, rng), b = random_matrix(1, 2, rng);
    double logit[2] = {b(0, 0), b(0, 1)};
    for (int k = 0; k < 2; ++k)
        for (std::size_t c = 0; c < 4; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < 5; ++r) mean += z(r, c);
            logit[k] += w(k, c) * mean / 5.0;
        }
    const double p1 = 1.0 / (1.0 + std::exp(logit[0] - logit[1]));
    auto p = classify(z, w, b);
    CHECK(std::abs(p[1] - p1) < 1e-12);
    CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);

    ParamStore store;
    ClassifierHead head = init_classifier(store, 4, rng);
    Tape t(false);
    const Matrix& pt = t.value(classify(t, store, head, t.constant(z)));
    auto pm = classify(z, store[head.weight].value, store[head.bias].value);
    CHECK(std::abs(pt(0, 1) - pm[1]) < 1e-12);
}

TEST_CASE("binary cross entropy") {
    CHECK(bce_loss({0.0, 1.0}, Label::fake) < 1e-11);
    CHECK(bce_loss({0.5, 0.5}, Label::real) == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss({0.9, 0.1}, Label::fake) == doctest::Approx(-std::log(0.1)));
    CHECK(std::isfinite(bce_loss({1.0, 0.0}, Label::fake)));
}

TEST_CASE("generation loss") {
    Matrix onehot(3, 5);
    const std::vector<TokenId> gold{1, 4, 2};
    for (std::size_t t = 0; t < 3; ++t) onehot(t, gold[t]) = 1.0;
    CHECK(gen_loss(onehot, gold) < 1e-11);
    CHECK(gen_loss(Matrix(3, 10, 0.1), gold) == doctest::Approx(std::log(10.0)));
    CHECK_THROWS_AS(gen_loss(onehot, std::vector<TokenId>{1, 2}), DimensionError);

    Rng rng(2);
    Matrix d = softmax_rows(random_matrix(4, 6, rng));
    const std::vector<TokenId> g{0, 5, 3, 3};
    double want = 0.0;
    for (std::size_t t = 0; t < 4; ++t) want -= std::log(d(t, g[t]));
    CHECK(std::abs(gen_loss(d, g) - want / 4.0) < 1e-12);
}

TEST_CASE("joint loss weights") {
    CHECK(joint_loss(1.0, 1.0, {}) == doctest::Approx(1.0));
    CHECK(joint_loss(0.3, 2.0, {1.0, 0.0}) == 0.3);
    CHECK(joint_loss(0.3, 2.0, {0.0, 1.0}) == 2.0);
}

TEST_CASE("teacher-forced rows are distributions and causal") {
    for (bool tied : {false, true}) {
        DecoderFixture f(tied);
        std::vector<TokenId> gold{5, 6, 7, kEos};
        Tape t(false);
        const Matrix d = t.value(decode_teacher_forced(t, f.store, f.p, f.cfg, t.constant(f.z), gold));
        CHECK(d.rows() == gold.size());
        CHECK(d.cols() == f.cfg.vocab_size);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            double s = 0.0;
            for (double v : d.row(r)) s += v;
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
        std::vector<TokenId> changed{5, 9, 9, kEos};
        Tape t2(false);
        const Matrix d2 = t2.value(decode_teacher_forced(t2, f.store, f.p, f.cfg, t2.constant(f.z), changed));
        // Inputs are BOS,5,6,7 vs BOS,5,9,9: rows 0 and 1 see the same prefix.
        for (std::size_t c = 0; c < d.cols(); ++c) {
            CHECK(d(0, c) == d2(0, c));
            CHECK(d(1, c) == d2(1, c));
        }
        CHECK(max_abs_diff(d, d2) > 0.0);
    }
}

TEST_CASE("teacher forcing preconditions") {
    DecoderFixture f;
    Tape t(false);
    Var z = t.constant(f.z);
    CHECK_THROWS_AS(decode_teacher_forced(t, f.store, f.p, f.cfg, z, std::vector<TokenId>{5, 6}), ValidationError);
    std::vector<TokenId> longer(f.cfg.max_gen_len + 1, 5);
    longer.back() = kEos;
    CHECK_THROWS_AS(decode_teacher_forced(t, f.store, f.p, f.cfg, z, longer), DimensionError);
}

TEST_CASE("decoder gradient of the generation loss") {
    DecoderFixture f;
    const std::size_t zi = f.store.add("z", f.z, LrGroup::backbone);
    const std::vector<TokenId> gold{4, 7, 3, kEos};
    const double err = testutil::tape_grad_error(f.store, [&](Tape& t) {
        Var probs = decode_teacher_forced(t, f.store, f.p, f.cfg, t.param(f.store[zi]), gold);
        return t.mean_neg_log_prob(probs, gold);
    });
    CHECK(err < 1e-3);
}

TEST_CASE("greedy stops at EOS and at the length cap") {
    DecoderFixture f;
    f.out_bias()(0, kEos) = 1e3;
    CHECK(greedy_generate(f.store, f.p, f.cfg, f.z, f.cfg.max_gen_len).empty());
    f.out_bias()(0, kEos) = -1e3;
    CHECK(greedy_generate(f.store, f.p, f.cfg, f.z, 7).size() == 7);
}

TEST_CASE("greedy output agrees with one full pass over its own prefix") {
    for (int seed = 0; seed < 5; ++seed) {
        DecoderFixture f;
        f.z = random_matrix(4, f.cfg.width, f.rng, 1.0 + seed);
        f.out_bias()(0, kEos) = -2.0;
        const std::vector<TokenId> out = greedy_generate(f.store, f.p, f.cfg, f.z, 8);
        std::vector<TokenId> inputs{kBos};
        inputs.insert(inputs.end(), out.begin(), out.end());
        const Matrix d = f.run(inputs);
        for (std::size_t t = 0; t < d.rows(); ++t) {
            const auto row = d.row(t);
            const auto arg = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
            if (t < out.size()) CHECK(arg == out[t]);
            else CHECK((out.size() == 8 || arg == kEos));
        }
    }
}

TEST_CASE("decoder config validation") {
    DecoderConfig c;
    c.max_gen_len = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}
