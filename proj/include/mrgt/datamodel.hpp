#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mrgt/numcore.hpp"

namespace mrgt {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReservedTokens = 4;

class Vocabulary {
public:
    /// Starts with the four reserved tokens only.
    Vocabulary();

    /// Returns the id of `token`, inserting it if new.
    TokenId add(std::string_view token);
    /// Unknown tokens map to UNK.
    TokenId lookup(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

enum class Label : std::uint8_t { real = 0, fake = 1 };

/// One news video: frames, title, OCR text, related news and the annotated
/// veracity label plus explanation.
struct NewsVideoSample {
    std::string id;
    std::string event_id;
    std::vector<TokenId> title;
    std::vector<TokenId> ocr;
    std::vector<std::vector<TokenId>> related;
    Matrix frames;  // K x D_in
    Label label = Label::real;
    std::vector<TokenId> explanation;  // always terminated by kEos

    bool has_ocr() const noexcept { return !ocr.empty(); }
};

struct Dataset {
    Vocabulary vocab;
    std::vector<NewsVideoSample> samples;
};

struct LoadOptions {
    std::size_t max_text_len = 224;
    std::size_t max_frames = 80;
    /// When set, frame rows must have this width; otherwise the first sample
    /// fixes it.
    std::optional<std::size_t> frame_dim;
    /// When set, the vocabulary is frozen and unseen tokens map to UNK.
    const Vocabulary* vocab = nullptr;
};

/// JSON Lines ingestion. Errors carry the 1-based line number.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts = {});
Dataset parse_dataset(std::istream& in, const LoadOptions& opts = {});
/// Parses a single JSON line against an existing vocabulary (frozen).
NewsVideoSample parse_sample(std::string_view line, const Vocabulary& vocab, const LoadOptions& opts = {});

/// Canonical one-line JSON for a sample (keys in fixed order, no whitespace).
std::string serialize_sample(const NewsVideoSample& s, const Vocabulary& vocab);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
void write_dataset(std::ostream& out, const Dataset& ds);

/// Throws ValidationError naming the offending field.
void validate_sample(const NewsVideoSample& s, std::size_t vocab_size, std::size_t frame_dim,
                     const LoadOptions& opts = {});

/// Drops OCR tokens first, then title tokens, until title+OCR fits; caps frames.
void truncate_sample(NewsVideoSample& s, std::size_t max_text_len, std::size_t max_frames);

enum class SplitMode : std::uint8_t { random, event_disjoint };
enum class SampleFilter : std::uint8_t { all, ocr_only, non_ocr_only };

struct SplitRatios {
    double train = 0.85;
    double val = 0.05;
    double test = 0.10;
};

/// Indices into the sample list.
struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    SplitMode mode = SplitMode::random;
    SampleFilter filter = SampleFilter::all;
};

DatasetSplit make_split(const std::vector<NewsVideoSample>& samples, const SplitRatios& ratios, SplitMode mode,
                        SampleFilter filter, std::uint64_t seed);

struct SynthConfig {
    std::size_t n_samples = 600;
    std::size_t vocab_size = 64;
    std::size_t frame_dim = 16;
    std::size_t max_frames = 6;
    double fraction_fake = 0.5;
    double fraction_non_ocr = 0.2247;
    std::uint64_t seed = 20240611;
};

/// Token layout of the synthetic vocabulary.
struct SynthLexicon {
    std::vector<TokenId> entities;
    std::vector<TokenId> contradictions;  // contradictions[i] negates entities[i]
    std::vector<TokenId> fillers;
};

SynthLexicon synth_lexicon(const Vocabulary& vocab);
Dataset synth_generate(const SynthConfig& cfg);

/// Table-1-style corpus statistics.
struct CorpusStats {
    std::size_t total = 0;
    std::size_t fake = 0;
    std::size_t real = 0;
    std::size_t with_ocr = 0;
    double mean_title_len = 0.0;
    double mean_explanation_len = 0.0;  // excluding EOS
};

CorpusStats corpus_stats(const std::vector<NewsVideoSample>& samples, const std::vector<std::size_t>* subset = nullptr);

} // namespace mrgt
