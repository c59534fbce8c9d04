#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/scorer.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// A sibling claim a leaf is conditioned on.
struct CondClaim {
    std::string node_id;
    std::string text;
};

/// Everything a leaf needs to be scored, shared by all leaves of a run.
struct InferenceContext {
    const EvidenceBank& bank;
    const std::string& summary;         // ORIGINAL DESCRIPTION
    const std::string& counterfactual;  // empty unless multiple-choice
    const RunConfig& config;
    const Backends& backends;
    const prompts::Templates& templates = prompts::Templates::defaults();
};

/// Conditioning claims for every non-pruned leaf under `root`, in document
/// order. With ConditioningOrder::right, child i of a node inherits its
/// parent's claims plus the claims of its later non-pruned siblings.
std::vector<std::pair<TreeNode*, std::vector<CondClaim>>> plan_leaves(TreeNode& root, ConditioningOrder order,
                                                                      std::span<const CondClaim> inherited = {});

/// Scores one leaf: top evidence_max factors (temporally ordered when
/// enabled) followed by the conditioning claims. Records the trace, presented
/// evidence, conditioning ids and propagated probability on the leaf.
void score_leaf(TreeNode& leaf, std::span<const CondClaim> conds, const InferenceContext& ctx);

/// Recursive probability propagation. Leaves are scored with their
/// conditioning claims and internal nodes multiply their non-pruned children:
/// P(c1|c2..cn) P(c2|c3..cn) ... P(cn). Every visited node gets a
/// propagated_prob. The parallel path plans all leaves first, scores them
/// concurrently, then folds the products; it matches infer_reference exactly.
Probability infer(TreeNode& root, const InferenceContext& ctx, std::span<const CondClaim> cond_claims = {},
                  Exec exec = Exec::parallel);

/// Literal depth-first recursion, kept as the reference for infer().
Probability infer_reference(TreeNode& root, const InferenceContext& ctx, std::span<const CondClaim> cond_claims = {});

/// Recomputes propagated probabilities from stored leaf scores (human
/// overrides win) without any backend traffic. Throws on an unscored leaf.
Probability repropagate(TreeNode& root);

/// Arithmetic mean of the effective scores of non-pruned leaves.
Probability aggregate_mean(const TreeNode& tree);
/// Geometric mean of the same scores.
Probability aggregate_geometric_mean(const TreeNode& tree);

/// Option score for product/mean/geometric aggregation after propagation.
Probability aggregate(const TreeNode& tree, Aggregation aggregation);

struct JudgeOption {
    std::string hypothesis;
    std::vector<std::pair<std::string, Probability>> leaves;  // sub-claim, score
};

/// Option summary for the judge: the hypothesis and its scored leaves.
JudgeOption judge_option(const std::string& hypothesis, const TreeNode& tree);

struct JudgeVerdict {
    std::size_t index = 0;  // zero-based
    std::string rationale;  // raw judge response
};

std::string judge_prompt(std::string_view question, std::span<const JudgeOption> options,
                         const prompts::Templates& templates = prompts::Templates::defaults());

/// First number in the response, read as a one-based option number.
/// Throws Error{parse} when absent or out of range.
std::size_t parse_judge_response(std::string_view response, std::size_t n_options);

/// Asks the chat backend which option is likeliest. Requires >= 2 options.
JudgeVerdict judge(std::string_view question, std::span<const JudgeOption> options, const ChatBackend& chat,
                   const prompts::Templates& templates = prompts::Templates::defaults(), int max_tokens = 1024);

}  // namespace bonsai
