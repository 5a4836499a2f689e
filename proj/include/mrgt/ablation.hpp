#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace mrgt {

/// Switches reproducing the w/o-* architecture variants.
struct AblationMask {
    bool no_title = false;
    bool no_ocr = false;
    bool no_related = false;
    bool no_visual = false;
    bool no_graph = false;

    bool any() const noexcept { return no_title || no_ocr || no_related || no_visual || no_graph; }
    /// False when every input segment is masked.
    bool valid() const noexcept { return !(no_title && no_ocr && no_related && no_visual); }
    /// "MRGT" for the full model, otherwise the comma-joined variant names.
    std::string describe() const;

    friend bool operator==(const AblationMask&, const AblationMask&) = default;
};

inline constexpr std::array<std::string_view, 5> kAblationNames = {"w/o-Title", "w/o-OCR", "w/o-Related",
                                                                   "w/o-Visual", "w/o-Graph"};

/// Accepts the names above (comma separated or as separate entries). Unknown
/// names raise UsageError listing the valid ones.
AblationMask parse_ablation(const std::vector<std::string>& names);
AblationMask single_ablation(std::string_view name);

} // namespace mrgt
