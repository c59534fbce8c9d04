#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace bonsai::prompts {

/// Prompt templates. Slots are written `{name}`; braces that do not name a
/// supplied slot are left untouched.
struct Templates {
    std::string decomposition;       // {statement}
    std::string scoring;             // {exemplars} {summary} {conditioning} {hypothesis} {information}
    std::string scoring_exemplars;
    std::string extract_transcript;  // {question} {dialogue}
    std::string extract_video;       // {question}
    std::string extract_image;       // {question}
    std::string summary;             // {observations}
    std::string hypothesis;          // {question} {answer}
    std::string judge;               // {question} {options}
    std::string temporal_note;

    /// Templates compiled from the prompts/ directory at build time.
    static const Templates& defaults();

    /// Defaults, with any `<name>.txt` present in `dir` overriding its template.
    static Templates load(const std::filesystem::path& dir);

    static Templates from(const std::optional<std::string>& dir) {
        return dir ? load(*dir) : defaults();
    }
};

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots);

/// Names of all template files, in the order the Templates fields are declared.
const std::map<std::string, std::string Templates::*>& template_files();

}  // namespace bonsai::prompts
