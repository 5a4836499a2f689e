#include "mrgt/relgraph.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mrgt/errors.hpp"

namespace mrgt {

namespace {

class GraphBuilder {
public:
    explicit GraphBuilder(std::size_t n) : g_() {
        g_.nodes = n;
        g_.adjacency = Matrix::identity(n);
    }

    void connect(std::size_t a, std::size_t b, EdgeRule rule) {
        if (a == b) return;
        const std::size_t i = std::min(a, b);
        const std::size_t j = std::max(a, b);
        if (g_.adjacency(i, j) != 0.0) return;
        g_.adjacency(i, j) = 1.0;
        g_.adjacency(j, i) = 1.0;
        g_.edge_log.push_back({i, j, rule});
    }

    MultimodalGraph finish() && {
        g_.normalized = normalize_adjacency(g_.adjacency);
        return std::move(g_);
    }

    MultimodalGraph& graph() { return g_; }

private:
    MultimodalGraph g_;
};

// Lowest index wins ties.
std::size_t most_similar(const Matrix& inputs, std::size_t from, const std::vector<std::size_t>& candidates) {
    std::size_t best = candidates.front();
    double best_sim = cosine_sim(inputs.row(from), inputs.row(best));
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        const double s = cosine_sim(inputs.row(from), inputs.row(candidates[c]));
        if (s > best_sim) {
            best_sim = s;
            best = candidates[c];
        }
    }
    return best;
}

} // namespace

MultimodalGraph build_graph(const SequenceX& x, const Matrix& inputs, const GraphConfig& cfg) {
    const std::size_t n = x.size();
    if (inputs.rows() != n) {
        throw DimensionError("build_graph: " + std::to_string(inputs.rows()) + " input rows for " + std::to_string(n) +
                             " positions");
    }
    GraphBuilder b(n);
    std::vector<std::size_t> title, ocr, frames;
    for (std::size_t k = 0; k < n; ++k) {
        b.graph().categories.push_back(x.positions[k].tag);
        switch (x.positions[k].tag) {
        case SourceTag::title: title.push_back(k); break;
        case SourceTag::ocr: ocr.push_back(k); break;
        case SourceTag::frame: frames.push_back(k); break;
        case SourceTag::related: break;
        }
    }

    for (std::size_t t : title) {
        for (std::size_t o : ocr) {
            const bool same = x.positions[t].item == x.positions[o].item;
            if (same || cosine_sim(inputs.row(t), inputs.row(o)) >= cfg.tau_sem) b.connect(t, o, EdgeRule::title_ocr);
        }
    }
    for (std::size_t f = 1; f < frames.size(); ++f) b.connect(frames[f - 1], frames[f], EdgeRule::frame_chain);
    if (!title.empty())
        for (std::size_t f : frames) b.connect(f, most_similar(inputs, f, title), EdgeRule::frame_title);
    if (!ocr.empty())
        for (std::size_t f : frames) b.connect(f, most_similar(inputs, f, ocr), EdgeRule::frame_ocr);

    const bool has_text = !title.empty() || !ocr.empty();
    const std::size_t anchor = !ocr.empty() ? ocr.back() : (title.empty() ? 0 : title.back());
    for (std::size_t k = 0; k < n; ++k) {
        if (x.positions[k].tag != SourceTag::related) continue;
        const bool doc_start = k == 0 || x.positions[k - 1].tag != SourceTag::related ||
                               x.positions[k - 1].doc != x.positions[k].doc;
        if (doc_start) {
            if (has_text) b.connect(anchor, k, EdgeRule::related_append);
        } else {
            b.connect(k - 1, k, EdgeRule::related_append);
        }
    }
    return std::move(b).finish();
}

Matrix normalize_adjacency(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("normalize_adjacency: matrix " + a.shape_str() + " is not square");
    const std::size_t n = a.rows();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += a(i, j);
        if (!(d > 0.0)) throw NumericError("normalize_adjacency: node " + std::to_string(i) + " has zero degree");
        inv_sqrt[i] = 1.0 / std::sqrt(d);
    }
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) * (inv_sqrt[std::min(i, j)] * inv_sqrt[std::max(i, j)]);
    return out;
}

void write_edge_log(std::ostream& out, const MultimodalGraph& g) {
    for (const auto& e : g.edge_log) {
        out << "{\"i\":" << e.i << ",\"j\":" << e.j << ",\"rule\":" << static_cast<int>(e.rule) << "}\n";
    }
}

} // namespace mrgt
