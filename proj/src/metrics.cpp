#include "mrgt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mrgt/errors.hpp"

namespace mrgt {

namespace {

using NgramCounts = std::map<std::vector<TokenId>, std::size_t>;

NgramCounts ngrams(std::span<const TokenId> seq, std::size_t n) {
    NgramCounts out;
    if (seq.size() < n) return out;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) ++out[std::vector<TokenId>(seq.begin() + i, seq.begin() + i + n)];
    return out;
}

void check_pairs(std::size_t c, std::size_t r, const char* metric) {
    if (c == 0) throw MetricError(std::string(metric) + ": empty candidate list");
    if (c != r) {
        throw MetricError(std::string(metric) + ": " + std::to_string(c) + " candidates for " + std::to_string(r) +
                          " references");
    }
}

} // namespace

std::array<double, 4> bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
    check_pairs(candidates.size(), references.size(), "bleu");
    std::array<double, 4> matched{};
    std::array<double, 4> total{};
    double cand_len = 0.0, ref_len = 0.0;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        cand_len += static_cast<double>(candidates[s].size());
        ref_len += static_cast<double>(references[s].size());
        for (std::size_t n = 1; n <= 4; ++n) {
            const NgramCounts c = ngrams(candidates[s], n);
            const NgramCounts r = ngrams(references[s], n);
            for (const auto& [gram, count] : c) {
                auto it = r.find(gram);
                const std::size_t clip = it == r.end() ? 0 : std::min(count, it->second);
                matched[n - 1] += static_cast<double>(clip);
                total[n - 1] += static_cast<double>(count);
            }
        }
    }
    std::array<double, 4> out{};
    if (cand_len == 0.0) return out;
    const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    double log_sum = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        if (total[k] == 0.0 || matched[k] == 0.0) break;  // this and every higher order stay 0
        log_sum += std::log(matched[k] / total[k]);
        out[k] = bp * std::exp(log_sum / static_cast<double>(k + 1));
    }
    return out;
}

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
    if (reference.empty()) throw MetricError("rouge_l: empty reference");
    constexpr double kBeta2 = 1.2 * 1.2;
    const double l = static_cast<double>(lcs_length(candidate, reference));
    const double r = l / static_cast<double>(reference.size());
    const double p = candidate.empty() ? 0.0 : l / static_cast<double>(candidate.size());
    const double denom = r + kBeta2 * p;
    return denom == 0.0 ? 0.0 : (1.0 + kBeta2) * r * p / denom;
}

double rouge_l(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
    check_pairs(candidates.size(), references.size(), "rouge_l");
    double sum = 0.0;
    for (std::size_t s = 0; s < candidates.size(); ++s) sum += rouge_l(candidates[s], references[s]);
    return sum / static_cast<double>(candidates.size());
}

namespace {

// Depth-first search over candidate positions. A candidate token either
// aligns to an unused reference position holding the same token or stays
// unaligned; the search keeps only alignments that can still reach the
// maximum match count and prunes on the best chunk count found so far.
class ChunkSearch {
public:
    ChunkSearch(std::span<const TokenId> cand, std::span<const TokenId> ref, std::size_t target)
        : cand_(cand), ref_(ref), target_(target), used_(ref.size(), false) {}

    std::size_t run() {
        visit(0, kNone, 0, 0);
        return best_;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    static constexpr std::size_t kBudget = 2'000'000;

    void visit(std::size_t i, std::size_t prev_ref, std::size_t matches, std::size_t chunks) {
        if (++nodes_ > kBudget && best_ != kNone) return;
        if (best_ != kNone && chunks >= best_) return;
        if (matches + (cand_.size() - i) < target_) return;
        if (i == cand_.size()) {
            if (matches == target_ && (best_ == kNone || chunks < best_)) best_ = chunks;
            return;
        }
        // Continuing the current chunk first finds good bounds early.
        if (prev_ref != kNone && prev_ref + 1 < ref_.size() && !used_[prev_ref + 1] && ref_[prev_ref + 1] == cand_[i]) {
            used_[prev_ref + 1] = true;
            visit(i + 1, prev_ref + 1, matches + 1, chunks);
            used_[prev_ref + 1] = false;
        }
        for (std::size_t j = 0; j < ref_.size(); ++j) {
            if (used_[j] || ref_[j] != cand_[i]) continue;
            if (prev_ref != kNone && j == prev_ref + 1) continue;
            used_[j] = true;
            visit(i + 1, j, matches + 1, chunks + 1);
            used_[j] = false;
        }
        visit(i + 1, kNone, matches, chunks);
    }

    std::span<const TokenId> cand_;
    std::span<const TokenId> ref_;
    std::size_t target_;
    std::vector<bool> used_;
    std::size_t best_ = kNone;
    std::size_t nodes_ = 0;
};

} // namespace

MeteorAlignment meteor_align(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
    std::map<TokenId, std::size_t> cc, rc;
    for (TokenId t : candidate) ++cc[t];
    for (TokenId t : reference) ++rc[t];
    MeteorAlignment a;
    for (const auto& [tok, n] : cc) {
        auto it = rc.find(tok);
        if (it != rc.end()) a.matches += std::min(n, it->second);
    }
    if (a.matches == 0) return a;
    a.chunks = ChunkSearch(candidate, reference, a.matches).run();
    return a;
}

double meteor_lite(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
    const MeteorAlignment a = meteor_align(candidate, reference);
    if (a.matches == 0) return 0.0;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references) {
    check_pairs(candidates.size(), references.size(), "meteor_lite");
    double sum = 0.0;
    for (std::size_t s = 0; s < candidates.size(); ++s) sum += meteor_lite(candidates[s], references[s]);
    return sum / static_cast<double>(candidates.size());
}

double cider(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
             std::span<const TokenSeq> corpus) {
    check_pairs(candidates.size(), references.size(), "cider");
    if (corpus.empty()) throw MetricError("cider: empty document-frequency corpus");
    const double n_docs = static_cast<double>(corpus.size());
    double total = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<TokenId>, double> df;
        for (const auto& doc : corpus)
            for (const auto& [gram, _] : ngrams(doc, n)) df[gram] += 1.0;
        auto idf = [&](const std::vector<TokenId>& gram) {
            auto it = df.find(gram);
            return std::log(n_docs / std::max(1.0, it == df.end() ? 0.0 : it->second));
        };
        for (std::size_t s = 0; s < candidates.size(); ++s) {
            const NgramCounts c = ngrams(candidates[s], n);
            const NgramCounts r = ngrams(references[s], n);
            double dot = 0.0, nc = 0.0, nr = 0.0;
            for (const auto& [gram, count] : c) {
                const double w = static_cast<double>(count) * idf(gram);
                nc += w * w;
                auto it = r.find(gram);
                if (it != r.end()) dot += w * static_cast<double>(it->second) * idf(gram);
            }
            for (const auto& [gram, count] : r) {
                const double w = static_cast<double>(count) * idf(gram);
                nr += w * w;
            }
            if (nc > 0.0 && nr > 0.0) total += 10.0 * dot / (std::sqrt(nc) * std::sqrt(nr));
        }
    }
    return total / (4.0 * static_cast<double>(candidates.size()));
}

ClassificationReport classification_report(std::span<const Label> predictions, std::span<const Label> labels) {
    if (predictions.empty()) throw MetricError("classification_report: empty input");
    if (predictions.size() != labels.size()) throw MetricError("classification_report: length mismatch");
    std::size_t confusion[2][2] = {{0, 0}, {0, 0}};  // [label][prediction]
    for (std::size_t i = 0; i < labels.size(); ++i)
        ++confusion[static_cast<int>(labels[i])][static_cast<int>(predictions[i])];
    ClassificationReport r;
    r.accuracy = static_cast<double>(confusion[0][0] + confusion[1][1]) / static_cast<double>(labels.size());
    for (int c = 0; c < 2; ++c) {
        const double tp = static_cast<double>(confusion[c][c]);
        const double predicted = static_cast<double>(confusion[0][c] + confusion[1][c]);
        const double actual = static_cast<double>(confusion[c][0] + confusion[c][1]);
        const double p = predicted == 0.0 ? 0.0 : tp / predicted;
        const double rec = actual == 0.0 ? 0.0 : tp / actual;
        r.macro_precision += p / 2.0;
        r.macro_recall += rec / 2.0;
        r.macro_f1 += (p + rec == 0.0 ? 0.0 : 2.0 * p * rec / (p + rec)) / 2.0;
    }
    return r;
}

EvalReport evaluate_outputs(std::span<const TokenSeq> generated, std::span<const TokenSeq> references,
                            std::span<const Label> predictions, std::span<const Label> labels) {
    EvalReport r;
    r.samples = generated.size();
    r.bleu = bleu(generated, references);
    r.rouge_l = rouge_l(generated, references);
    r.meteor_lite = meteor_lite(generated, references);
    r.cider = cider(generated, references, references);
    r.classification = classification_report(predictions, labels);
    return r;
}

std::string report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["regime"] = r.regime;
    j["samples"] = r.samples;
    j["bleu"] = {r.bleu[0], r.bleu[1], r.bleu[2], r.bleu[3]};
    j["rouge_l"] = r.rouge_l;
    j["meteor_lite"] = r.meteor_lite;
    j["cider"] = r.cider;
    j["accuracy"] = r.classification.accuracy;
    j["macro_precision"] = r.classification.macro_precision;
    j["macro_recall"] = r.classification.macro_recall;
    j["macro_f1"] = r.classification.macro_f1;
    j["note"] = "METEOR is exact-match only (no stemming or synonyms); CIDEr without length penalty";
    return j.dump();
}

std::string report_table(std::span<const EvalReport> rows, std::span<const std::string> names) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %6s %6s %6s %6s %7s %6s %6s %6s %6s %6s %6s\n", "Model", "B1", "B2", "B3",
                  "B4", "ROUGE-L", "METEOR", "CIDEr", "Rec", "Prec", "F1", "Acc");
    os << buf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const EvalReport& r = rows[i];
        const auto& c = r.classification;
        std::snprintf(buf, sizeof buf, "%-14s %6.2f %6.2f %6.2f %6.2f %7.2f %6.2f %6.2f %6.2f %6.2f %6.2f %6.2f\n",
                      i < names.size() ? names[i].c_str() : "", 100 * r.bleu[0], 100 * r.bleu[1], 100 * r.bleu[2],
                      100 * r.bleu[3], 100 * r.rouge_l, 100 * r.meteor_lite, 100 * r.cider, 100 * c.macro_recall,
                      100 * c.macro_precision, 100 * c.macro_f1, 100 * c.accuracy);
        os << buf;
    }
    return os.str();
}

HumanSummary aggregate_human(const HumanRatings& ratings) {
    HumanSummary out;
    if (ratings.empty()) return out;
    std::size_t n_ratings = 0;
    for (const auto& sample : ratings) {
        if (sample.empty()) throw MetricError("aggregate_human: sample without ratings");
        std::array<std::size_t, 4> votes{};
        for (const auto& r : sample) {
            ++votes[static_cast<std::size_t>(r.adequacy)];
            out.fluency += r.fluency;
            ++n_ratings;
        }
        // Scan from least favourable so ties land there.
        std::size_t winner = 3;
        for (std::size_t c = 4; c-- > 0;)
            if (votes[c] > votes[winner]) winner = c;
        out.distribution[winner] += 1.0;
    }
    const double n = static_cast<double>(ratings.size());
    for (double& d : out.distribution) d /= n;
    out.adequacy = out.distribution[0] + out.distribution[1];
    out.fluency /= static_cast<double>(n_ratings);
    return out;
}

} // namespace mrgt
