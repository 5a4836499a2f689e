#include "mrgt/ablation.hpp"

#include <sstream>

#include "mrgt/errors.hpp"

namespace mrgt {

std::string AblationMask::describe() const {
    if (!any()) return "MRGT";
    const bool flags[] = {no_title, no_ocr, no_related, no_visual, no_graph};
    std::string out;
    for (std::size_t i = 0; i < kAblationNames.size(); ++i) {
        if (!flags[i]) continue;
        if (!out.empty()) out += ",";
        out += kAblationNames[i];
    }
    return out;
}

AblationMask single_ablation(std::string_view name) {
    AblationMask m;
    if (name == "w/o-Title") m.no_title = true;
    else if (name == "w/o-OCR") m.no_ocr = true;
    else if (name == "w/o-Related") m.no_related = true;
    else if (name == "w/o-Visual") m.no_visual = true;
    else if (name == "w/o-Graph") m.no_graph = true;
    else {
        std::string valid;
        for (auto n : kAblationNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
        throw UsageError("unknown ablation '" + std::string(name) + "'; valid names: " + valid);
    }
    return m;
}

AblationMask parse_ablation(const std::vector<std::string>& names) {
    AblationMask m;
    for (const auto& entry : names) {
        std::stringstream ss(entry);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name.empty()) continue;
            const AblationMask one = single_ablation(name);
            m.no_title |= one.no_title;
            m.no_ocr |= one.no_ocr;
            m.no_related |= one.no_related;
            m.no_visual |= one.no_visual;
            m.no_graph |= one.no_graph;
        }
    }
    if (!m.valid()) throw UsageError("ablation masks every input segment");
    return m;
}

} // namespace mrgt
