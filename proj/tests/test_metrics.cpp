#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "metric_oracles.hpp"
#include "mrgt/errors.hpp"
#include "mrgt/metrics.hpp"

using namespace mrgt;

namespace {

std::vector<TokenSeq> seqs(std::initializer_list<TokenSeq> l) { return l; }

} // namespace

TEST_CASE("bleu identity and disjoint") {
    auto refs = seqs({{1, 2, 3, 4, 5}, {6, 7, 8, 9}});
    for (double b : bleu(refs, refs)) CHECK(b == doctest::Approx(1.0));
    auto other = seqs({{10, 11, 12, 13, 14}, {15, 16, 17, 18}});
    for (double b : bleu(other, refs)) CHECK(b == 0.0);
    CHECK_THROWS_AS(bleu(std::vector<TokenSeq>{}, std::vector<TokenSeq>{}), MetricError);
}

TEST_CASE("bleu clips repeated unigrams") {
    // "the the the" vs "the cat": unigram precision 1/3, no bigram match.
    auto c = seqs({{1, 1, 1}}), r = seqs({{1, 2}});
    auto b = bleu(c, r);
    auto o = oracle::bleu(c, r);
    CHECK(b[0] == doctest::Approx(1.0 / 3.0));
    CHECK(b[1] == 0.0);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(b[n] - o[n]) < 1e-12);
}

TEST_CASE("bleu brevity penalty") {
    auto c = seqs({{1, 2}}), r = seqs({{1, 2, 3, 4}});
    CHECK(bleu(c, r)[0] == doctest::Approx(std::exp(1.0 - 2.0)));
}

TEST_CASE("random corpora agree with the counting oracles") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<TokenSeq> c, r;
        const int n = rng.range(1, 5);
        for (int k = 0; k < n; ++k) {
            c.push_back(oracle::random_seq(rng, 5, 10));
            r.push_back(oracle::random_seq(rng, 5, 10));
        }
        auto b = bleu(c, r), o = oracle::bleu(c, r);
        for (int k = 0; k < 4; ++k) CHECK(std::abs(b[k] - o[k]) < 1e-9);
        for (int k = 0; k < n; ++k) {
            CHECK(lcs_length(c[k], r[k]) == oracle::lcs(c[k], r[k]));
            CHECK(std::abs(rouge_l(c[k], r[k]) - oracle::rouge_l(c[k], r[k])) < 1e-12);
        }
        CHECK(std::abs(cider(c, r, r) - oracle::cider(c, r, r)) < 1e-9);
    }
}

TEST_CASE("rouge-l") {
    TokenSeq a{1, 2, 3}, b{4, 5};
    CHECK(rouge_l(a, a) == doctest::Approx(1.0));
    CHECK(rouge_l(a, b) == 0.0);
    CHECK(rouge_l(TokenSeq{}, a) == 0.0);
    // LCS 2 of |c|=3, |r|=4: P=2/3, R=1/2
    const double p = 2.0 / 3, r = 0.5, b2 = 1.44;
    CHECK(rouge_l(TokenSeq{1, 9, 3}, TokenSeq{1, 2, 3, 4}) == doctest::Approx((1 + b2) * r * p / (r + b2 * p)));
}

TEST_CASE("meteor-lite") {
    TokenSeq a{1, 2, 3, 4};
    CHECK(meteor_lite(a, a) == 0.9921875);
    CHECK(meteor_lite(a, TokenSeq{5, 6}) == 0.0);
    MeteorAlignment swapped = meteor_align(TokenSeq{3, 4, 1, 2}, a);
    CHECK(swapped.matches == 4);
    CHECK(swapped.chunks == 2);
}

TEST_CASE("meteor alignment matches exhaustive search") {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        TokenSeq c = oracle::random_seq(rng, 4, 8), r = oracle::random_seq(rng, 4, 8);
        MeteorAlignment got = meteor_align(c, r), want = oracle::meteor_align(c, r);
        CHECK(got.matches == want.matches);
        CHECK(got.chunks == want.chunks);
        if (want.matches > 0) {
            const double m = static_cast<double>(want.matches);
            const double p = m / c.size(), rc = m / r.size();
            const double f = 10 * p * rc / (rc + 9 * p);
            const double pen = 0.5 * std::pow(static_cast<double>(want.chunks) / m, 3.0);
            CHECK(std::abs(meteor_lite(c, r) - f * (1 - pen)) < 1e-12);
        }
    }
}

TEST_CASE("cider guards and toy corpus") {
    auto c = seqs({{1, 2, 3}}), r = seqs({{4, 5, 6}});
    CHECK(cider(c, r, r) == 0.0);
    auto same = seqs({{1, 2, 3}});
    CHECK(cider(same, same, same) == 0.0);

    auto corpus = seqs({{1, 2, 3, 4}, {1, 2, 5}, {6, 7, 1}});
    auto cands = seqs({{1, 2, 3, 9}, {2, 5, 1}, {6, 7, 7, 1}});
    const double got = cider(cands, corpus, corpus);
    CHECK(std::abs(got - oracle::cider(cands, corpus, corpus)) < 1e-9);
    CHECK(got > 0.0);
    CHECK(got <= 10.0);
}

TEST_CASE("classification report") {
    std::vector<Label> y{Label::real, Label::fake, Label::real, Label::fake};
    auto perfect = classification_report(y, y);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.macro_f1 == 1.0);
    std::vector<Label> flipped{Label::fake, Label::real, Label::fake, Label::real};
    CHECK(classification_report(flipped, y).accuracy == 0.0);
    CHECK_THROWS_AS(classification_report(std::vector<Label>{}, std::vector<Label>{}), MetricError);

    // tp(fake)=2 fp=1 fn=1 tn=2
    std::vector<Label> truth{Label::fake, Label::fake, Label::fake, Label::real, Label::real, Label::real};
    std::vector<Label> pred{Label::fake, Label::fake, Label::real, Label::fake, Label::real, Label::real};
    auto r = classification_report(pred, truth);
    CHECK(r.accuracy == doctest::Approx(4.0 / 6));
    CHECK(r.macro_precision == doctest::Approx(2.0 / 3));
    CHECK(r.macro_recall == doctest::Approx(2.0 / 3));
    CHECK(r.macro_f1 == doctest::Approx(2.0 / 3));

    std::vector<Label> all_real(4, Label::real);
    auto degenerate = classification_report(all_real, y);
    CHECK(degenerate.macro_precision == doctest::Approx(0.25));
    CHECK(degenerate.macro_recall == doctest::Approx(0.5));
}

TEST_CASE("human rating aggregation") {
    HumanRatings one{{{Adequacy::justify, 1.0}}, {{Adequacy::sri, 0.5}}, {{Adequacy::nri, 0.0}},
                     {{Adequacy::weakly_justify, 0.5}}};
    HumanSummary s = aggregate_human(one);
    CHECK(s.distribution[0] == 0.25);
    CHECK(s.distribution[2] == 0.25);
    CHECK(s.adequacy == 0.5);
    CHECK(s.fluency == doctest::Approx(0.5));

    HumanRatings tie{{{Adequacy::justify, 1.0}, {Adequacy::sri, 1.0}}};
    CHECK(aggregate_human(tie).distribution[2] == 1.0);

    HumanRatings table;
    const std::pair<Adequacy, int> counts[] = {
        {Adequacy::justify, 9}, {Adequacy::weakly_justify, 7}, {Adequacy::sri, 3}, {Adequacy::nri, 1}};
    for (auto [a, n] : counts)
        for (int i = 0; i < n; ++i) table.push_back({{a, 0.8}, {a, 0.9}, {Adequacy::nri, 0.7}});
    HumanSummary t = aggregate_human(table);
    CHECK(t.distribution[0] == doctest::Approx(0.45));
    CHECK(t.distribution[1] == doctest::Approx(0.35));
    CHECK(t.distribution[2] == doctest::Approx(0.15));
    CHECK(t.distribution[3] == doctest::Approx(0.05));
    CHECK(t.adequacy == doctest::Approx(0.80));
}

TEST_CASE("report formats") {
    auto refs = seqs({{1, 2, 3, 4}});
    std::vector<Label> y{Label::fake};
    EvalReport r = evaluate_outputs(refs, refs, y, y);
    r.regime = "overlap";
    auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["bleu"][0] == 1.0);
    CHECK(j["samples"] == 1);
    const std::vector<std::string> names{"MRGT"};
    const std::string table = report_table(std::span<const EvalReport>(&r, 1), names);
    CHECK(table.find("MRGT") != std::string::npos);
    CHECK(table.find("100.00") != std::string::npos);
}
