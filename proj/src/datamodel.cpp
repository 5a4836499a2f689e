#include "mrgt/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mrgt/errors.hpp"
#include "mrgt/rng.hpp"

namespace mrgt {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Vocabulary::Vocabulary() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

TokenId Vocabulary::add(std::string_view token) {
    std::string key(token);
    auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    const TokenId id = tokens_.size();
    tokens_.push_back(key);
    ids_.emplace(std::move(key), id);
    return id;
}

TokenId Vocabulary::lookup(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= tokens_.size()) throw ValidationError("token", "id " + std::to_string(id) + " outside vocabulary");
    return tokens_[id];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    static const char* reserved[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
    if (tokens.size() < kReservedTokens) throw ValidationError("vocab", "fewer than four entries");
    for (std::size_t i = 0; i < kReservedTokens; ++i) {
        if (tokens[i] != reserved[i]) throw ValidationError("vocab", "reserved token mismatch at id " + std::to_string(i));
    }
    Vocabulary v;
    for (std::size_t i = kReservedTokens; i < tokens.size(); ++i) {
        if (v.contains(tokens[i])) throw ValidationError("vocab", "duplicate token " + tokens[i]);
        v.add(tokens[i]);
    }
    return v;
}

namespace {

class TokenMapper {
public:
    TokenMapper(Vocabulary* growable, const Vocabulary* frozen) : growable_(growable), frozen_(frozen) {}

    TokenId operator()(const std::string& t) const {
        return growable_ != nullptr ? growable_->add(t) : frozen_->lookup(t);
    }

private:
    Vocabulary* growable_;
    const Vocabulary* frozen_;
};

std::vector<TokenId> token_list(const json& j, const char* field, const TokenMapper& map) {
    if (!j.is_array()) throw ValidationError(field, "expected an array of token strings");
    std::vector<TokenId> out;
    out.reserve(j.size());
    for (const auto& t : j) {
        if (!t.is_string()) throw ValidationError(field, "expected an array of token strings");
        out.push_back(map(t.get<std::string>()));
    }
    return out;
}

const json& field_of(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ValidationError(name, "missing field");
    return *it;
}

NewsVideoSample sample_from_json(const json& obj, const TokenMapper& map) {
    if (!obj.is_object()) throw ValidationError("line", "expected a JSON object");
    NewsVideoSample s;
    const json& id = field_of(obj, "id");
    if (!id.is_string()) throw ValidationError("id", "expected a string");
    s.id = id.get<std::string>();
    const json& ev = field_of(obj, "event_id");
    if (!ev.is_string()) throw ValidationError("event_id", "expected a string");
    s.event_id = ev.get<std::string>();
    const json& label = field_of(obj, "label");
    if (!label.is_number_integer() || (label.get<long long>() != 0 && label.get<long long>() != 1)) {
        throw ValidationError("label", "expected integer 0 or 1");
    }
    s.label = label.get<long long>() == 0 ? Label::real : Label::fake;
    s.title = token_list(field_of(obj, "title"), "title", map);
    s.ocr = token_list(field_of(obj, "ocr"), "ocr", map);
    const json& rel = field_of(obj, "related");
    if (!rel.is_array()) throw ValidationError("related", "expected an array of token arrays");
    for (const auto& doc : rel) s.related.push_back(token_list(doc, "related", map));

    const json& frames = field_of(obj, "frames");
    if (!frames.is_array()) throw ValidationError("frames", "expected an array of numeric rows");
    const std::size_t k = frames.size();
    const std::size_t width = k == 0 || !frames[0].is_array() ? 0 : frames[0].size();
    std::vector<double> data;
    data.reserve(k * width);
    for (const auto& row : frames) {
        if (!row.is_array()) throw ValidationError("frames", "expected an array of numeric rows");
        if (row.size() != width) throw ValidationError("frames", "ragged frame rows");
        for (const auto& v : row) {
            if (!v.is_number()) throw ValidationError("frames", "non-numeric frame value");
            data.push_back(v.get<double>());
        }
    }
    s.frames = Matrix(k, width, std::move(data));

    s.explanation = token_list(field_of(obj, "explanation"), "explanation", map);
    if (s.explanation.empty() || s.explanation.back() != kEos) s.explanation.push_back(kEos);
    return s;
}

json parse_line(std::string_view line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
}

} // namespace

void truncate_sample(NewsVideoSample& s, std::size_t max_text_len, std::size_t max_frames) {
    while (s.title.size() + s.ocr.size() > max_text_len && !s.ocr.empty()) s.ocr.pop_back();
    while (s.title.size() > max_text_len && s.title.size() > 1) s.title.pop_back();
    if (s.frames.rows() > max_frames) {
        std::vector<double> kept(s.frames.data().begin(),
                                 s.frames.data().begin() + static_cast<std::ptrdiff_t>(max_frames * s.frames.cols()));
        s.frames = Matrix(max_frames, s.frames.cols(), std::move(kept));
    }
}

void validate_sample(const NewsVideoSample& s, std::size_t vocab_size, std::size_t frame_dim,
                     const LoadOptions& opts) {
    if (s.id.empty()) throw ValidationError("id", "empty sample id");
    if (s.title.empty()) throw ValidationError("title", "title must have at least one token");
    auto check_ids = [&](const std::vector<TokenId>& ids, const char* field) {
        for (TokenId t : ids)
            if (t >= vocab_size) throw ValidationError(field, "token id " + std::to_string(t) + " outside vocabulary");
    };
    check_ids(s.title, "title");
    check_ids(s.ocr, "ocr");
    for (const auto& d : s.related) check_ids(d, "related");
    check_ids(s.explanation, "explanation");
    if (s.explanation.empty() || s.explanation.back() != kEos) throw ValidationError("explanation", "must end with EOS");
    if (s.frames.rows() < 1) throw ValidationError("frames", "at least one frame required");
    if (s.frames.rows() > opts.max_frames) throw ValidationError("frames", "more than max_frames frames");
    if (s.frames.cols() != frame_dim) {
        throw ValidationError("frames", "row width " + std::to_string(s.frames.cols()) + " != expected " +
                                            std::to_string(frame_dim));
    }
    if (!all_finite(s.frames)) throw ValidationError("frames", "non-finite frame value");
    if (s.title.size() + s.ocr.size() > opts.max_text_len) throw ValidationError("ocr", "title+ocr exceeds max_text_len");
}

Dataset parse_dataset(std::istream& in, const LoadOptions& opts) {
    Dataset ds;
    if (opts.vocab != nullptr) ds.vocab = *opts.vocab;
    TokenMapper map(opts.vocab == nullptr ? &ds.vocab : nullptr, opts.vocab == nullptr ? nullptr : &ds.vocab);
    std::optional<std::size_t> frame_dim = opts.frame_dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const json obj = parse_line(line, line_no);
        try {
            NewsVideoSample s = sample_from_json(obj, map);
            truncate_sample(s, opts.max_text_len, opts.max_frames);
            if (!frame_dim) frame_dim = s.frames.cols();
            validate_sample(s, ds.vocab.size(), *frame_dim, opts);
            ds.samples.push_back(std::move(s));
        } catch (const ValidationError& e) {
            throw ValidationError(e.field(), "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    return parse_dataset(in, opts);
}

NewsVideoSample parse_sample(std::string_view line, const Vocabulary& vocab, const LoadOptions& opts) {
    const json obj = parse_line(line, 1);
    TokenMapper map(nullptr, &vocab);
    NewsVideoSample s = sample_from_json(obj, map);
    truncate_sample(s, opts.max_text_len, opts.max_frames);
    validate_sample(s, vocab.size(), opts.frame_dim.value_or(s.frames.cols()), opts);
    return s;
}

std::string serialize_sample(const NewsVideoSample& s, const Vocabulary& vocab) {
    auto tokens = [&](const std::vector<TokenId>& ids, bool strip_eos) {
        ordered_json a = ordered_json::array();
        std::size_t n = ids.size();
        if (strip_eos && n > 0 && ids[n - 1] == kEos) --n;
        for (std::size_t i = 0; i < n; ++i) a.push_back(vocab.token(ids[i]));
        return a;
    };
    ordered_json o;
    o["id"] = s.id;
    o["event_id"] = s.event_id;
    o["label"] = static_cast<int>(s.label);
    o["title"] = tokens(s.title, false);
    o["ocr"] = tokens(s.ocr, false);
    ordered_json rel = ordered_json::array();
    for (const auto& d : s.related) rel.push_back(tokens(d, false));
    o["related"] = std::move(rel);
    ordered_json frames = ordered_json::array();
    for (std::size_t r = 0; r < s.frames.rows(); ++r) {
        auto row = s.frames.row(r);
        frames.push_back(ordered_json(std::vector<double>(row.begin(), row.end())));
    }
    o["frames"] = std::move(frames);
    o["explanation"] = tokens(s.explanation, true);
    return o.dump();
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    for (const auto& s : ds.samples) out << serialize_sample(s, ds.vocab) << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset " + path.string());
    write_dataset(out, ds);
    if (!out) throw IoError("write failed for " + path.string());
}

DatasetSplit make_split(const std::vector<NewsVideoSample>& samples, const SplitRatios& ratios, SplitMode mode,
                        SampleFilter filter, std::uint64_t seed) {
    if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw SplitError("split ratios must be positive and sum to 1");
    }
    DatasetSplit split;
    split.mode = mode;
    split.filter = filter;

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool ocr = samples[i].has_ocr();
        if (filter == SampleFilter::ocr_only && !ocr) continue;
        if (filter == SampleFilter::non_ocr_only && ocr) continue;
        pool.push_back(i);
    }
    const double n = static_cast<double>(pool.size());

    if (mode == SplitMode::random) {
        // Small epsilon so ratios like 0.1 * 750 floor to 75 rather than 74.
        const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9));
        const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9));
        Rng rng(seed);
        rng.shuffle(pool);
        split.test.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
        split.val.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_test),
                         pool.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
        split.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), pool.end());
    } else {
        std::map<std::string, std::vector<std::size_t>> events;
        for (std::size_t i : pool) events[samples[i].event_id].push_back(i);
        if (events.size() < 3) {
            throw SplitError("event_disjoint split needs at least 3 events, found " + std::to_string(events.size()));
        }
        std::vector<const std::vector<std::size_t>*> order;
        for (const auto& [_, members] : events) order.push_back(&members);
        // std::map iteration gives event_id order; stable sort keeps it for ties.
        std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->size() > b->size(); });
        const double target[3] = {ratios.train * n, ratios.val * n, ratios.test * n};
        std::vector<std::size_t>* lists[3] = {&split.train, &split.val, &split.test};
        for (const auto* members : order) {
            // Least-filled split relative to its target; with three or more
            // events every split receives at least one.
            std::size_t best = 0;
            double best_fill = 1e300;
            for (std::size_t k = 0; k < 3; ++k) {
                const double fill = static_cast<double>(lists[k]->size()) / target[k];
                if (fill < best_fill) {
                    best_fill = fill;
                    best = k;
                }
            }
            lists[best]->insert(lists[best]->end(), members->begin(), members->end());
        }
    }
    for (auto* l : {&split.train, &split.val, &split.test}) std::sort(l->begin(), l->end());
    return split;
}

namespace {

// Template words shared by every synthetic explanation.
const std::vector<std::string>& template_words() {
    static const std::vector<std::string> words = {"the",     "video", "is",    "real",        "fake",
                                                   "because", "ocr",   "and",   "related",     "news",
                                                   "confirm", "claim", "about", "contradicts"};
    return words;
}

std::vector<TokenId> template_ids(const Vocabulary& v, std::initializer_list<const char*> words) {
    std::vector<TokenId> out;
    for (const char* w : words) out.push_back(v.lookup(w));
    return out;
}

std::vector<TokenId> filler_run(Rng& rng, const SynthLexicon& lex, int lo, int hi) {
    std::vector<TokenId> out(static_cast<std::size_t>(rng.range(lo, hi)));
    for (auto& t : out) t = lex.fillers[rng.index(lex.fillers.size())];
    return out;
}

void insert_at_random(Rng& rng, std::vector<TokenId>& seq, TokenId tok) {
    const std::size_t pos = rng.index(seq.size() + 1);
    seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(pos), tok);
}

} // namespace

SynthLexicon synth_lexicon(const Vocabulary& vocab) {
    SynthLexicon lex;
    for (TokenId id = kReservedTokens; id < vocab.size(); ++id) {
        const std::string& t = vocab.token(id);
        if (t.rfind("ent", 0) == 0) lex.entities.push_back(id);
        else if (t.rfind("not_ent", 0) == 0) lex.contradictions.push_back(id);
        else if (t.rfind("w", 0) == 0 && t.size() > 1 && std::isdigit(static_cast<unsigned char>(t[1])))
            lex.fillers.push_back(id);
    }
    return lex;
}

Dataset synth_generate(const SynthConfig& cfg) {
    if (cfg.vocab_size < 32) throw ValidationError("vocab_size", "synthetic vocabulary needs at least 32 tokens");
    if (cfg.fraction_fake < 0.0 || cfg.fraction_fake > 1.0) throw ValidationError("fraction_fake", "outside [0,1]");
    if (cfg.fraction_non_ocr < 0.0 || cfg.fraction_non_ocr > 1.0)
        throw ValidationError("fraction_non_ocr", "outside [0,1]");
    if (cfg.frame_dim == 0 || cfg.max_frames < 2) throw ValidationError("frames", "need frame_dim >= 1 and max_frames >= 2");

    Dataset ds;
    Vocabulary& v = ds.vocab;
    for (const auto& w : template_words()) v.add(w);
    const std::size_t free_slots = cfg.vocab_size - v.size();
    const std::size_t n_entities = free_slots / 3;
    for (std::size_t i = 0; i < n_entities; ++i) v.add("ent" + std::to_string(i));
    for (std::size_t i = 0; i < n_entities; ++i) v.add("not_ent" + std::to_string(i));
    for (std::size_t i = 0; v.size() < cfg.vocab_size; ++i) v.add("w" + std::to_string(i));
    const SynthLexicon lex = synth_lexicon(v);

    Rng rng(cfg.seed);
    // Entity anchors in frame-feature space.
    Matrix anchors(n_entities, cfg.frame_dim);
    for (double& a : anchors.data()) a = rng.normal();

    const std::size_t n = cfg.n_samples;
    const std::size_t n_events = std::max<std::size_t>(3, n / 6);
    std::vector<std::size_t> event_entity(n_events);
    for (auto& e : event_entity) e = rng.index(n_entities);

    const auto n_fake = static_cast<std::size_t>(std::llround(cfg.fraction_fake * static_cast<double>(n)));
    const auto n_non_ocr = static_cast<std::size_t>(std::llround(cfg.fraction_non_ocr * static_cast<double>(n)));
    std::vector<Label> labels(n, Label::real);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_fake), Label::fake);
    rng.shuffle(labels);
    std::vector<bool> no_ocr(n, false);
    std::fill(no_ocr.begin(), no_ocr.begin() + static_cast<std::ptrdiff_t>(n_non_ocr), true);
    rng.shuffle(no_ocr);

    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        NewsVideoSample s;
        s.id = "s" + std::to_string(i);
        const std::size_t event = i % n_events;
        s.event_id = "ev" + std::to_string(event);
        s.label = labels[i];
        const std::size_t ent_idx = event_entity[event];
        const TokenId e = lex.entities[ent_idx];
        const TokenId contra = lex.contradictions[ent_idx];

        s.title = filler_run(rng, lex, 3, 6);
        insert_at_random(rng, s.title, e);
        if (!no_ocr[i]) {
            s.ocr = filler_run(rng, lex, 2, 4);
            insert_at_random(rng, s.ocr, e);
        }
        const int n_docs = rng.range(1, 2);
        for (int d = 0; d < n_docs; ++d) {
            auto doc = filler_run(rng, lex, 2, 4);
            insert_at_random(rng, doc, e);
            s.related.push_back(std::move(doc));
        }

        const int k = rng.range(2, static_cast<int>(cfg.max_frames));
        s.frames = Matrix(static_cast<std::size_t>(k), cfg.frame_dim);
        for (std::size_t f = 0; f < s.frames.rows(); ++f)
            for (std::size_t c = 0; c < cfg.frame_dim; ++c) s.frames(f, c) = rng.normal(anchors(ent_idx, c), 0.1);

        if (s.label == Label::real) {
            s.explanation = s.has_ocr()
                                ? template_ids(v, {"the", "video", "is", "real", "because", "ocr", "and", "related", "news",
                                                   "confirm"})
                                : template_ids(v, {"the", "video", "is", "real", "because", "related", "news", "confirm"});
        } else {
            // Contradiction comes from OCR when available, otherwise from one related doc.
            const bool from_ocr = s.has_ocr() && rng.uniform() < 0.5;
            auto replace = [&](std::vector<TokenId>& seq) { std::replace(seq.begin(), seq.end(), e, contra); };
            if (from_ocr) {
                replace(s.ocr);
                s.explanation = template_ids(v, {"the", "video", "is", "fake", "because", "ocr", "contradicts", "the",
                                                 "claim", "about"});
            } else {
                replace(s.related[rng.index(s.related.size())]);
                s.explanation = template_ids(v, {"the", "video", "is", "fake", "because", "related", "news",
                                                 "contradicts", "the", "claim", "about"});
            }
        }
        s.explanation.push_back(e);
        s.explanation.push_back(kEos);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

CorpusStats corpus_stats(const std::vector<NewsVideoSample>& samples, const std::vector<std::size_t>* subset) {
    CorpusStats st;
    double title = 0.0, expl = 0.0;
    auto visit = [&](const NewsVideoSample& s) {
        ++st.total;
        (s.label == Label::fake ? st.fake : st.real)++;
        if (s.has_ocr()) ++st.with_ocr;
        title += static_cast<double>(s.title.size());
        std::size_t len = s.explanation.size();
        if (len > 0 && s.explanation.back() == kEos) --len;
        expl += static_cast<double>(len);
    };
    if (subset != nullptr) {
        for (std::size_t i : *subset) visit(samples.at(i));
    } else {
        for (const auto& s : samples) visit(s);
    }
    if (st.total > 0) {
        st.mean_title_len = title / static_cast<double>(st.total);
        st.mean_explanation_len = expl / static_cast<double>(st.total);
    }
    return st;
}

} // namespace mrgt
