#include "bonsai/prompts.hpp"

#include "bonsai/serialize.hpp"

namespace bonsai::prompts {

namespace detail {
extern const Templates kCompiledTemplates;
}

namespace {

/// Template files end with a newline; the template itself does not.
std::string without_final_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

const Templates& stripped_defaults() {
    static const Templates t = [] {
        Templates out = detail::kCompiledTemplates;
        for (const auto& [_, member] : template_files()) out.*member = without_final_newline(out.*member);
        return out;
    }();
    return t;
}

}  // namespace

const std::map<std::string, std::string Templates::*>& template_files() {
    static const std::map<std::string, std::string Templates::*> files{
        {"decomposition", &Templates::decomposition},
        {"scoring", &Templates::scoring},
        {"scoring_exemplars", &Templates::scoring_exemplars},
        {"extract_transcript", &Templates::extract_transcript},
        {"extract_video", &Templates::extract_video},
        {"extract_image", &Templates::extract_image},
        {"summary", &Templates::summary},
        {"hypothesis", &Templates::hypothesis},
        {"judge", &Templates::judge},
        {"temporal_note", &Templates::temporal_note},
    };
    return files;
}

const Templates& Templates::defaults() { return stripped_defaults(); }

Templates Templates::load(const std::filesystem::path& dir) {
    Templates t = defaults();
    for (const auto& [name, member] : template_files()) {
        const auto file = dir / (name + ".txt");
        if (std::filesystem::exists(file)) t.*member = without_final_newline(read_file(file));
    }
    return t;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string name(tmpl.substr(i + 1, close - i - 1));
                if (auto it = slots.find(name); it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace bonsai::prompts
