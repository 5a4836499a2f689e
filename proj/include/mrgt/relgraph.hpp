#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mrgt/encoder.hpp"
#include "mrgt/numcore.hpp"

namespace mrgt {

enum class EdgeRule : std::uint8_t {
    title_ocr = 1,       // semantic relevance between title and OCR tokens
    frame_chain = 2,     // consecutive frames
    frame_title = 3,     // frame -> most similar title token
    frame_ocr = 4,       // frame -> most similar OCR token
    related_append = 5,  // related docs chained and attached after the text nodes
};

struct GraphEdge {
    std::size_t i = 0;  // i < j
    std::size_t j = 0;
    EdgeRule rule = EdgeRule::title_ocr;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct GraphConfig {
    /// Cosine threshold for title/OCR relevance.
    double tau_sem = 0.5;
};

struct MultimodalGraph {
    std::size_t nodes = 0;
    std::vector<SourceTag> categories;
    Matrix adjacency;   // binary, symmetric, unit diagonal
    Matrix normalized;  // D^-1/2 A D^-1/2
    /// First rule that introduced each off-diagonal edge, in insertion order.
    std::vector<GraphEdge> edge_log;
};

/// `inputs` holds one row per sequence position in the input-embedding space
/// (token embeddings and projected frames).
MultimodalGraph build_graph(const SequenceX& x, const Matrix& inputs, const GraphConfig& cfg = {});

Matrix normalize_adjacency(const Matrix& adjacency);

/// One JSON object per line: {"i":..,"j":..,"rule":..}.
void write_edge_log(std::ostream& out, const MultimodalGraph& g);

} // namespace mrgt
