#include "bonsai/scorer.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include "bonsai/error.hpp"
#include "bonsai/text.hpp"

namespace bonsai {

std::string conditioning_text(std::string_view claim_text) { return "It is true that: " + std::string(claim_text); }

std::string question_context(std::string_view question) {
    return "someone is asking the question, " + text::trim(question);
}

std::string make_anchor_summary(std::span<const std::string> observations,
                                const std::optional<std::string>& task_context, const ChatBackend& chat,
                                const prompts::Templates& templates, int max_tokens) {
    if (task_context) return *task_context;
    require(!observations.empty(), "make_anchor_summary: no observations to summarise");
    ChatRequest req;
    req.prompt = prompts::render(templates.summary,
                                 {{"observations", text::enumerate({observations.begin(), observations.end()})}});
    req.max_tokens = max_tokens;
    auto summary = text::trim(chat.complete(req));
    if (summary.empty()) throw Error(ErrorKind::parse, "summary response is empty");
    return summary;
}

std::string conditioning_block(std::string_view counterfactual_context, bool temporal_note,
                               const prompts::Templates& templates) {
    std::string out;
    if (!text::trim(counterfactual_context).empty()) out += text::trim(counterfactual_context) + "\n\n";
    if (temporal_note) out += templates.temporal_note + "\n\n";
    return out;
}

std::string build_scoring_prompt(std::string_view claim, std::string_view summary,
                                 std::span<const PresentedFactor> factors, std::string_view conditioning,
                                 const prompts::Templates& templates) {
    require(!factors.empty(), "build_scoring_prompt: NEW INFORMATION would be empty");
    std::vector<std::string> items;
    items.reserve(factors.size());
    for (const auto& f : factors) items.push_back(f.text);
    std::string block(conditioning);
    if (!block.empty() && !block.ends_with("\n\n")) block += block.ends_with('\n') ? "\n" : "\n\n";
    return prompts::render(templates.scoring, {{"exemplars", templates.scoring_exemplars},
                                               {"summary", std::string(summary)},
                                               {"conditioning", block},
                                               {"hypothesis", std::string(claim)},
                                               {"information", text::enumerate(items)}});
}

namespace {

struct Entry {
    std::size_t index;
    std::size_t body_begin;  // just past "EXPLANATION:"
    std::size_t end;         // start of the next entry
};

std::vector<Entry> find_entries(std::string_view response) {
    static const std::regex marker(R"(\((\d+)\)\s*EXPLANATION\s*:)", std::regex::icase);
    std::vector<Entry> entries;
    const std::string s(response);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), marker); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        entries.push_back({std::stoul(m[1].str()), static_cast<std::size_t>(m.position(0) + m.length(0)), s.size()});
        if (entries.size() > 1) entries[entries.size() - 2].end = static_cast<std::size_t>(m.position(0));
    }
    return entries;
}

ParsedStep parse_entry(std::string_view response, const Entry& e) {
    static const std::regex score_re(R"(SCORE\s*:\s*\**\s*(-?[0-9]+(?:\.[0-9]+)?))", std::regex::icase);
    const std::string body(response.substr(e.body_begin, e.end - e.body_begin));
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(body.begin(), body.end(), score_re); it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    const std::string idx = std::to_string(e.index);
    if (!found) throw Error(ErrorKind::parse, "score entry (" + idx + ") has no SCORE");
    const double raw = std::strtod(last[1].str().c_str(), nullptr);
    if (!(raw >= 0.0 && raw <= 10.0))
        throw Error(ErrorKind::parse, "score entry (" + idx + ") has out-of-range score " + last[1].str());
    ParsedStep step;
    step.explanation = text::trim(body.substr(0, static_cast<std::size_t>(last.position(0))));
    if (step.explanation.empty()) throw Error(ErrorKind::parse, "score entry (" + idx + ") has an empty explanation");
    step.score = raw / 10.0;
    return step;
}

}  // namespace

ParsedStep parse_score_step(std::string_view response, std::size_t index) {
    for (const auto& e : find_entries(response))
        if (e.index == index) return parse_entry(response, e);
    throw Error(ErrorKind::parse, "score response is missing entry (" + std::to_string(index) + ")");
}

ScoreTrace parse_score_trace(std::string_view response, std::size_t n_factors) {
    const auto entries = find_entries(response);
    for (std::size_t i = 0; i <= n_factors; ++i) {
        if (i >= entries.size() || entries[i].index != i)
            throw Error(ErrorKind::parse, "score response is missing entry (" + std::to_string(i) + ")");
    }
    if (entries.size() > n_factors + 1)
        throw Error(ErrorKind::parse, "score response has unexpected entry (" + std::to_string(entries[n_factors + 1].index) +
                                          ") for " + std::to_string(n_factors) + " factors");
    ScoreTrace trace;
    const auto anchor = parse_entry(response, entries[0]);
    trace.anchor_explanation = anchor.explanation;
    trace.anchor_score = anchor.score;
    for (std::size_t i = 1; i <= n_factors; ++i) {
        const auto step = parse_entry(response, entries[i]);
        trace.steps.push_back({"", step.explanation, step.score});
    }
    trace.final = trace.steps.empty() ? trace.anchor_score : trace.steps.back().score;
    return trace;
}

namespace {

std::string render_entry(std::size_t index, const std::string& explanation, Probability score) {
    return "(" + std::to_string(index) + ") EXPLANATION: " + explanation + "\nSCORE: " +
           std::to_string(static_cast<int>(std::lround(score * 10.0)));
}

}  // namespace

ScoreTrace score_claim(std::string_view claim, std::span<const PresentedFactor> factors, std::string_view summary,
                       std::string_view conditioning, ScoringMode mode, const ChatBackend& scorer,
                       const prompts::Templates& templates, int max_tokens) {
    require(!factors.empty(), "score_claim: at least one factor is required");
    ChatRequest req;
    req.max_tokens = max_tokens;

    ScoreTrace trace;
    if (mode == ScoringMode::single_call) {
        req.prompt = build_scoring_prompt(claim, summary, factors, conditioning, templates);
        trace = parse_score_trace(scorer.complete(req), factors.size());
    } else {
        req.prompt = build_scoring_prompt(claim, summary, factors.first(1), conditioning, templates);
        trace = parse_score_trace(scorer.complete(req), 1);
        std::string so_far = render_entry(0, trace.anchor_explanation, trace.anchor_score) + "\n" +
                             render_entry(1, trace.steps[0].explanation, trace.steps[0].score);
        for (std::size_t i = 2; i <= factors.size(); ++i) {
            req.prompt = build_scoring_prompt(claim, summary, factors.first(i), conditioning, templates) + "\n" + so_far;
            const auto step = parse_score_step(scorer.complete(req), i);
            trace.steps.push_back({"", step.explanation, step.score});
            so_far += "\n" + render_entry(i, step.explanation, step.score);
        }
        trace.final = trace.steps.back().score;
    }
    for (std::size_t i = 0; i < factors.size(); ++i) trace.steps[i].factor_id = factors[i].id;
    return trace;
}

}  // namespace bonsai
