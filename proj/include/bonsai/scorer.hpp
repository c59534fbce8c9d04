#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// One item of the NEW INFORMATION list: an evidence factor or a conditioning claim.
struct PresentedFactor {
    std::string id;
    std::string text;
};

/// Phrasing used to present a sibling claim as evidence.
std::string conditioning_text(std::string_view claim_text);

/// Task-provided anchor framing for question-driven tasks.
std::string question_context(std::string_view question);

/// The ORIGINAL DESCRIPTION slot: `task_context` verbatim when given, otherwise
/// a one-to-three sentence summary of `observations` from the chat backend.
std::string make_anchor_summary(std::span<const std::string> observations,
                                const std::optional<std::string>& task_context, const ChatBackend& chat,
                                const prompts::Templates& templates = prompts::Templates::defaults(),
                                int max_tokens = 1024);

/// Extra conditioning paragraph(s) placed before HYPOTHESIS (counterfactual
/// context, temporal note). Empty when neither applies.
std::string conditioning_block(std::string_view counterfactual_context, bool temporal_note,
                               const prompts::Templates& templates = prompts::Templates::defaults());

/// Instantiates the scoring template with its rubric and both exemplars.
/// Throws Error{precondition} when `factors` is empty.
std::string build_scoring_prompt(std::string_view claim, std::string_view summary,
                                 std::span<const PresentedFactor> factors, std::string_view conditioning,
                                 const prompts::Templates& templates = prompts::Templates::defaults());

/// One "(i) EXPLANATION: ... SCORE: s" entry.
struct ParsedStep {
    std::string explanation;
    Probability score = 0.0;
};

/// Entry `index` of a scoring response. Throws Error{parse} if it is absent or
/// its score is not on the 0..10 rubric.
ParsedStep parse_score_step(std::string_view response, std::size_t index);

/// Anchor (0) plus steps 1..n_factors. Missing or extra indices, or scores
/// outside 0..10, throw Error{parse}. Step factor ids are left empty.
ScoreTrace parse_score_trace(std::string_view response, std::size_t n_factors);

/// Anchor-and-adjust elicitation. Single-call mode asks for the anchor and
/// every adjustment at once; multi-call mode asks for one adjustment per call,
/// feeding the trace so far back into the prompt. Steps align 1:1 with
/// `factors` in the order given.
ScoreTrace score_claim(std::string_view claim, std::span<const PresentedFactor> factors, std::string_view summary,
                       std::string_view conditioning, ScoringMode mode, const ChatBackend& scorer,
                       const prompts::Templates& templates = prompts::Templates::defaults(), int max_tokens = 1024);

}  // namespace bonsai
