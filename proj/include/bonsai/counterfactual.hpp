#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/evidence.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// One extraction pass and the option scores it produced. Round 0 is the
/// initial bank; later rounds come from test-time evidence rescaling.
struct EvidenceRound {
    int index = 0;
    std::string context;  // extraction context: the question or the leaf claims
    EvidenceBank bank;
    std::vector<Probability> option_scores;

    bool operator==(const EvidenceRound&) const = default;
};

/// A multiple-choice episode. Trees align 1:1 with options; the root id of
/// option i's tree is "i".
struct McqRun {
    int revision = 0;
    std::string question;
    std::vector<std::string> answers;  // raw answer strings as given
    std::vector<Claim> options;        // hypothesis statements
    std::vector<TreeNode> trees;
    std::vector<Probability> option_scores;
    std::size_t chosen = 0;  // zero-based
    RunConfig config;
    std::vector<EvidenceRound> rounds;
    std::string summary;
    std::string counterfactual_context;
    std::optional<std::string> judge_rationale;
    std::vector<std::string> warnings;

    /// Bank of the latest round (empty when the run has no evidence).
    const EvidenceBank& bank() const;

    bool operator==(const McqRun&) const = default;
};

/// Multiple-choice input. Evidence comes from `sources` (extracted during the
/// run) or a prebuilt `bank`, or neither.
struct McqInput {
    std::string question;
    std::vector<std::string> answers;
    /// Answers are already standalone statements; skip the rewrite.
    bool options_are_hypotheses = false;
    std::optional<SourceManifest> sources;
    std::optional<EvidenceBank> bank;
};

/// {question, options[], options_are_hypotheses?, sources? | manifest? , bank?}.
/// Paths resolve against `base_dir`.
McqInput mcq_input_from_json(const Json& j, const std::filesystem::path& base_dir);
McqInput load_mcq_input(const std::filesystem::path& path);

/// Rewrites a question/answer pair as one declarative statement.
Claim qa_to_hypothesis(std::string_view question, std::string_view answer, const ChatBackend& chat,
                       const prompts::Templates& templates = prompts::Templates::defaults(), int max_tokens = 1024);

/// "Exactly one of the following statements is true: (1) ... (2) .... Score
/// the hypothesis relative to these alternatives."
std::string counterfactual_context(std::span<const Claim> hypotheses);

/// Marks a leaf of option o pruned iff every other option's hypothesis
/// entails it with probability >= tau. If that would prune every leaf of an
/// option, its least-entailed leaf (by the minimum over the other
/// hypotheses; first on ties) is kept. Returns the number of leaves pruned.
std::size_t prune_shared_leaves(std::span<TreeNode> trees, std::span<const Claim> hypotheses, double tau,
                                const EntailmentBackend& entailment, Exec exec = Exec::parallel);

/// Concatenated claims of all non-pruned leaves, used as the test-time
/// extraction context.
std::string leaf_context(std::span<const TreeNode> trees);

/// Scores every option tree against `bank` with the run's summary and
/// counterfactual context, then aggregates and selects.
void score_options(McqRun& run, const EvidenceBank& bank, const Backends& backends,
                   const prompts::Templates& templates = prompts::Templates::defaults(), Exec exec = Exec::parallel);

/// Recomputes propagated probabilities, option scores and (except for judge
/// aggregation, whose pick is kept) the chosen option from stored leaf
/// scores. Makes no backend calls.
void recompute_scores(McqRun& run);

/// Index of the highest score; the lowest index wins ties.
std::size_t argmax(std::span<const Probability> scores);

/// Full pipeline: hypotheses, trees, pruning, evidence, counterfactual scoring,
/// aggregation, selection. Stage errors carry the stage and option.
McqRun answer_mcq(const McqInput& input, const RunConfig& config, const Backends& backends,
                  const prompts::Templates& templates = prompts::Templates::defaults(), Exec exec = Exec::parallel);

/// While the best option score is below config.theta, up to
/// config.rescale_rounds times: re-extracts evidence from `sources` with the
/// leaf claims as context, replaces the bank, re-scores, and records a round.
/// Returns the number of rounds added.
int rescale_evidence(McqRun& run, const SourceManifest& sources, const Backends& backends,
                     const prompts::Templates& templates = prompts::Templates::defaults(), Exec exec = Exec::parallel);

}  // namespace bonsai
