#include "bonsai/inference.hpp"

#include <cmath>
#include <regex>

#include "bonsai/error.hpp"
#include "bonsai/retriever.hpp"
#include "bonsai/text.hpp"
#include "bonsai/tree.hpp"

namespace bonsai {

namespace {

std::vector<std::size_t> active_children(const TreeNode& node) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < node.children.size(); ++i)
        if (!node.children[i].pruned) out.push_back(i);
    return out;
}

/// Conditioning set for the child at position `pos` of `active`.
std::vector<CondClaim> child_conditions(const TreeNode& node, const std::vector<std::size_t>& active, std::size_t pos,
                                        std::span<const CondClaim> inherited, ConditioningOrder order) {
    std::vector<CondClaim> conds(inherited.begin(), inherited.end());
    const std::size_t b = order == ConditioningOrder::right ? pos + 1 : 0;
    const std::size_t e = order == ConditioningOrder::right ? active.size() : pos;
    for (std::size_t k = b; k < e; ++k) {
        const auto& sib = node.children[active[k]];
        conds.push_back({sib.id, sib.claim.text});
    }
    return conds;
}

void plan_into(TreeNode& node, std::vector<CondClaim> conds, ConditioningOrder order,
               std::vector<std::pair<TreeNode*, std::vector<CondClaim>>>& out) {
    if (node.is_leaf()) {
        out.emplace_back(&node, std::move(conds));
        return;
    }
    const auto active = active_children(node);
    for (std::size_t pos = 0; pos < active.size(); ++pos)
        plan_into(node.children[active[pos]], child_conditions(node, active, pos, conds, order), order, out);
}

Probability leaf_value(const TreeNode& leaf) {
    const auto score = leaf.effective_score();
    if (!score) throw Error(ErrorKind::precondition, "leaf " + leaf.id + " has no score");
    return *score;
}

Probability fold(TreeNode& node) {
    if (node.is_leaf()) {
        node.propagated_prob = leaf_value(node);
        return *node.propagated_prob;
    }
    Probability p = 1.0;
    for (auto& child : node.children)
        if (!child.pruned) p *= fold(child);
    node.propagated_prob = p;
    return p;
}

Probability reference_recurse(TreeNode& node, std::span<const CondClaim> conds, const InferenceContext& ctx) {
    if (node.is_leaf()) {
        score_leaf(node, conds, ctx);
        return *node.propagated_prob;
    }
    const auto active = active_children(node);
    Probability p = 1.0;
    for (std::size_t pos = 0; pos < active.size(); ++pos) {
        const auto child_conds = child_conditions(node, active, pos, conds, ctx.config.conditioning);
        p *= reference_recurse(node.children[active[pos]], child_conds, ctx);
    }
    node.propagated_prob = p;
    return p;
}

}  // namespace

std::vector<std::pair<TreeNode*, std::vector<CondClaim>>> plan_leaves(TreeNode& root, ConditioningOrder order,
                                                                      std::span<const CondClaim> inherited) {
    std::vector<std::pair<TreeNode*, std::vector<CondClaim>>> out;
    plan_into(root, {inherited.begin(), inherited.end()}, order, out);
    return out;
}

void score_leaf(TreeNode& leaf, std::span<const CondClaim> conds, const InferenceContext& ctx) {
    try {
        std::vector<EvidenceFactor> evidence;
        if (!ctx.bank.empty()) {
            require(ctx.backends.relevance != nullptr, "no relevance backend");
            evidence = retrieve_top_k(leaf.claim, ctx.bank, ctx.config.evidence_max, *ctx.backends.relevance);
            if (ctx.config.temporal_enhancement) evidence = order_temporal(std::move(evidence));
        }
        std::vector<PresentedFactor> presented;
        for (const auto& f : evidence) presented.push_back({f.id, f.text});
        for (const auto& c : conds) presented.push_back({"cond:" + c.node_id, conditioning_text(c.text)});
        require(!presented.empty(), "no evidence and no conditioning claims to score against");
        require(ctx.backends.scorer != nullptr, "no scoring backend");

        const auto block = conditioning_block(ctx.counterfactual, ctx.config.temporal_enhancement, ctx.templates);
        leaf.score_trace = score_claim(leaf.claim.text, presented, ctx.summary, block, ctx.config.scoring_mode,
                                       *ctx.backends.scorer, ctx.templates, ctx.config.max_tokens);
        leaf.evidence = std::move(evidence);
        leaf.conditioned_on.clear();
        for (const auto& c : conds) leaf.conditioned_on.push_back(c.node_id);
        leaf.propagated_prob = leaf_value(leaf);
    } catch (const Error& e) {
        throw e.with_context("scoring node " + leaf.id);
    }
}

Probability infer(TreeNode& root, const InferenceContext& ctx, std::span<const CondClaim> cond_claims, Exec exec) {
    auto jobs = plan_leaves(root, ctx.config.conditioning, cond_claims);
    for_each_index(jobs.size(), exec, [&](std::size_t i) { score_leaf(*jobs[i].first, jobs[i].second, ctx); });
    return fold(root);
}

Probability infer_reference(TreeNode& root, const InferenceContext& ctx, std::span<const CondClaim> cond_claims) {
    return reference_recurse(root, cond_claims, ctx);
}

Probability repropagate(TreeNode& root) { return fold(root); }

Probability aggregate_mean(const TreeNode& tree) {
    const auto ls = leaves(tree);
    require(!ls.empty(), "aggregate_mean: tree has no unpruned leaves");
    double sum = 0.0;
    for (const auto* l : ls) sum += leaf_value(*l);
    return sum / static_cast<double>(ls.size());
}

Probability aggregate_geometric_mean(const TreeNode& tree) {
    const auto ls = leaves(tree);
    require(!ls.empty(), "aggregate_geometric_mean: tree has no unpruned leaves");
    double product = 1.0;
    for (const auto* l : ls) product *= leaf_value(*l);
    return std::pow(product, 1.0 / static_cast<double>(ls.size()));
}

Probability aggregate(const TreeNode& tree, Aggregation aggregation) {
    switch (aggregation) {
        case Aggregation::product:
            if (!tree.propagated_prob) throw Error(ErrorKind::precondition, "tree " + tree.id + " is not propagated");
            return *tree.propagated_prob;
        case Aggregation::mean:
        case Aggregation::judge:
            return aggregate_mean(tree);
        case Aggregation::geometric_mean:
            return aggregate_geometric_mean(tree);
    }
    return 0.0;
}

JudgeOption judge_option(const std::string& hypothesis, const TreeNode& tree) {
    JudgeOption opt{hypothesis, {}};
    for (const auto* l : leaves(tree)) opt.leaves.emplace_back(l->claim.text, leaf_value(*l));
    return opt;
}

std::string judge_prompt(std::string_view question, std::span<const JudgeOption> options,
                         const prompts::Templates& templates) {
    std::string block;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i) block += "\n\n";
        block += "HYPOTHESIS (" + std::to_string(i + 1) + "): " + options[i].hypothesis;
        for (const auto& [claim, score] : options[i].leaves)
            block += "\n  - " + claim + " (score " + text::format_fixed(score, 2) + ")";
    }
    return prompts::render(templates.judge, {{"question", std::string(question)}, {"options", block}});
}

std::size_t parse_judge_response(std::string_view response, std::size_t n_options) {
    static const std::regex number(R"(\d+)");
    const std::string s(response);
    std::smatch m;
    if (!std::regex_search(s, m, number))
        throw Error(ErrorKind::parse, "judge response names no option: \"" + text::trim(s).substr(0, 80) + "\"");
    const unsigned long pick = std::stoul(m.str());
    if (pick < 1 || pick > n_options)
        throw Error(ErrorKind::parse, "judge picked option " + m.str() + " of " + std::to_string(n_options));
    return static_cast<std::size_t>(pick - 1);
}

JudgeVerdict judge(std::string_view question, std::span<const JudgeOption> options, const ChatBackend& chat,
                   const prompts::Templates& templates, int max_tokens) {
    require(options.size() >= 2, "judge: at least two options are required");
    ChatRequest req;
    req.prompt = judge_prompt(question, options, templates);
    req.max_tokens = max_tokens;
    auto response = chat.complete(req);
    return {parse_judge_response(response, options.size()), text::trim(response)};
}

}  // namespace bonsai
