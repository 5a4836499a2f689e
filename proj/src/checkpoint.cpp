#include "mrgt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mrgt/config.hpp"
#include "mrgt/errors.hpp"

namespace mrgt {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'G', 'T'};

enum class BlobKind : std::uint8_t { value = 0, first_moment = 1, second_moment = 2 };

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
    void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T uint() {
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            const int c = in_.get();
            if (c == std::char_traits<char>::eof()) throw ParseError("checkpoint: unexpected end of file");
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
        }
        return static_cast<T>(v);
    }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError("checkpoint: unexpected end of file");
        return s;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

private:
    std::istream& in_;
};

struct Entry {
    std::string name;
    BlobKind kind;
    const Matrix* data;
};

} // namespace

Checkpoint make_checkpoint(const MrgtModel& model, const Vocabulary& vocab, const TrainConfig& train,
                           const AdamState& optimizer, std::uint64_t epoch, const std::string& rng_state) {
    Checkpoint c{model.config(), train, vocab, {}, {}, optimizer, epoch, rng_state};
    for (const auto& p : model.params()) {
        c.names.push_back(p.name);
        c.values.push_back(p.value);
    }
    if (c.optimizer.m.empty()) c.optimizer = AdamState::zeros_like(model.params());
    return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
    if (c.optimizer.m.size() != c.values.size() || c.optimizer.v.size() != c.values.size() ||
        c.names.size() != c.values.size()) {
        throw DimensionError("checkpoint: parameter, name and moment counts differ");
    }
    nlohmann::ordered_json cfg;
    cfg["model"] = to_json(c.model);
    cfg["train"] = to_json(c.train);
    cfg["vocab"] = c.vocab.tokens();
    const std::string cfg_text = cfg.dump();

    std::vector<Entry> entries;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        entries.push_back({c.names[i], BlobKind::value, &c.values[i]});
        entries.push_back({c.names[i], BlobKind::first_moment, &c.optimizer.m[i]});
        entries.push_back({c.names[i], BlobKind::second_moment, &c.optimizer.v[i]});
    }

    Writer w(out);
    out.write(kMagic, 4);
    w.uint<std::uint16_t>(kCheckpointVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(cfg_text.size()));
    w.bytes(cfg_text);
    w.uint<std::uint64_t>(c.epoch);
    w.uint<std::uint64_t>(c.optimizer.step);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.rng_state.size()));
    w.bytes(c.rng_state);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        w.uint<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
        w.bytes(e.name);
        w.uint<std::uint8_t>(static_cast<std::uint8_t>(e.kind));
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.data->rows()));
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.data->cols()));
        w.uint<std::uint64_t>(offset);
        offset += 8 * e.data->size();
    }
    for (const auto& e : entries)
        for (double v : e.data->data()) w.f64(v);
    if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    write_checkpoint(out, c);
}

Checkpoint read_checkpoint(std::istream& in) {
    Reader r(in);
    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("checkpoint: bad magic");
    const auto version = r.uint<std::uint16_t>();
    if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    const std::string cfg_text = r.bytes(r.uint<std::uint32_t>());
    Checkpoint c;
    try {
        const auto cfg = nlohmann::json::parse(cfg_text);
        apply_json(cfg.at("model"), c.model);
        apply_json(cfg.at("train"), c.train);
        c.vocab = Vocabulary::from_tokens(cfg.at("vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: bad config block: ") + e.what());
    }
    c.epoch = r.uint<std::uint64_t>();
    c.optimizer.step = r.uint<std::uint64_t>();
    c.rng_state = r.bytes(r.uint<std::uint32_t>());
    const auto n_entries = r.uint<std::uint32_t>();
    if (n_entries % 3 != 0) throw ParseError("checkpoint: entry count not a multiple of 3");

    struct Manifest {
        std::string name;
        BlobKind kind;
        std::uint32_t rows, cols;
        std::uint64_t offset;
    };
    std::vector<Manifest> manifest;
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        Manifest m;
        m.name = r.bytes(r.uint<std::uint16_t>());
        m.kind = static_cast<BlobKind>(r.uint<std::uint8_t>());
        m.rows = r.uint<std::uint32_t>();
        m.cols = r.uint<std::uint32_t>();
        m.offset = r.uint<std::uint64_t>();
        manifest.push_back(std::move(m));
    }
    std::uint64_t expected_offset = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const Manifest& m = manifest[i];
        if (m.offset != expected_offset) throw ParseError("checkpoint: blob offsets are not contiguous");
        if (static_cast<std::uint8_t>(m.kind) != i % 3 || m.name != manifest[i - i % 3].name) {
            throw ParseError("checkpoint: manifest entry " + std::to_string(i) + " out of order");
        }
        Matrix mat(m.rows, m.cols);
        for (double& v : mat.data()) v = r.f64();
        expected_offset += 8ull * mat.size();
        switch (m.kind) {
        case BlobKind::value:
            c.names.push_back(m.name);
            c.values.push_back(std::move(mat));
            break;
        case BlobKind::first_moment: c.optimizer.m.push_back(std::move(mat)); break;
        case BlobKind::second_moment: c.optimizer.v.push_back(std::move(mat)); break;
        }
    }
    return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

MrgtModel restore_model(const Checkpoint& c) {
    MrgtModel model(c.model);
    ParamStore& params = model.params();
    if (params.size() != c.values.size()) throw ValidationError("checkpoint", "parameter count does not match model");
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        ParamTensor& p = params.at(c.names[i]);
        if (!p.value.same_shape(c.values[i])) {
            throw ValidationError("checkpoint", "shape mismatch for " + c.names[i] + ": " + c.values[i].shape_str() +
                                                    " vs " + p.value.shape_str());
        }
        p.value = c.values[i];
    }
    return model;
}

bool same_state(const Checkpoint& a, const Checkpoint& b) {
    auto bits_equal = [](const std::vector<Matrix>& x, const std::vector<Matrix>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!x[i].same_shape(y[i])) return false;
            if (std::memcmp(x[i].data().data(), y[i].data().data(), 8 * x[i].size()) != 0) return false;
        }
        return true;
    };
    return to_json(a.model) == to_json(b.model) && to_json(a.train) == to_json(b.train) &&
           a.vocab.tokens() == b.vocab.tokens() && a.names == b.names && bits_equal(a.values, b.values) &&
           bits_equal(a.optimizer.m, b.optimizer.m) && bits_equal(a.optimizer.v, b.optimizer.v) &&
           a.optimizer.step == b.optimizer.step && a.epoch == b.epoch && a.rng_state == b.rng_state;
}

} // namespace mrgt
