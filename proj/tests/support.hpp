#pragma once

// Shared helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/text.hpp"
#include "bonsai/tree.hpp"
#include "bonsai/types.hpp"

namespace bonsai::testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(BONSAI_FIXTURE_DIR) / name;
}

/// Pieces of a scoring prompt: the hypothesis and the NEW INFORMATION items.
struct ScoringPromptView {
    std::string hypothesis;
    std::vector<std::string> information;
    /// Claims presented as "It is true that: <claim>", in order.
    std::vector<std::string> conditions;
};

inline ScoringPromptView view_scoring_prompt(const std::string& prompt) {
    ScoringPromptView v;
    const auto tail_at = prompt.rfind("That is the end of the examples");
    const std::string tail = prompt.substr(tail_at == std::string::npos ? 0 : tail_at);
    const auto h = tail.rfind("HYPOTHESIS: ");
    if (h != std::string::npos) {
        const auto e = tail.find('\n', h);
        v.hypothesis = tail.substr(h + 12, e - h - 12);
    }
    const auto ni = tail.rfind("NEW INFORMATION:\n");
    const auto ps = tail.rfind("\n\nPROBABILITY SCORES:");
    if (ni != std::string::npos && ps != std::string::npos && ps > ni) {
        for (const auto& line : text::split_lines(tail.substr(ni + 17, ps - ni - 17))) {
            const auto close = line.find(") ");
            if (line.empty() || line[0] != '(' || close == std::string::npos) continue;
            const std::string item = line.substr(close + 2);
            v.information.push_back(item);
            static const std::string cond = "It is true that: ";
            if (item.rfind(cond, 0) == 0) v.conditions.push_back(item.substr(cond.size()));
        }
    }
    return v;
}

/// A complete single-call scoring response: anchor plus one step per item,
/// every score `step`, except the final score `last`.
inline std::string scoring_response(std::size_t n_items, int last, int anchor = 5, int step = 5) {
    std::string out = "(0) EXPLANATION: Anchor from the summary.\nSCORE: " + std::to_string(anchor) + "\n";
    for (std::size_t i = 1; i <= n_items; ++i)
        out += "(" + std::to_string(i) + ") EXPLANATION: Adjusting for item " + std::to_string(i) + ".\nSCORE: " +
               std::to_string(i == n_items ? last : step) + "\n";
    return out;
}

/// Key of a scripted conditional: claim text plus the sorted conditioning set.
inline std::string conditional_key(const std::string& claim, std::vector<std::string> conditions) {
    std::sort(conditions.begin(), conditions.end());
    std::string key = claim + "|";
    for (const auto& c : conditions) key += c + ";";
    return key;
}

/// Rubric score (0..10) a scripted scorer assigns to P(claim | conditions):
/// a fixed hash of the key, so every distinct conditioning set gets its own
/// value and a wrong conditioning set is almost always detected.
inline int scripted_rubric(const std::string& claim, const std::vector<std::string>& conditions) {
    return static_cast<int>(std::stoull(text::fnv1a_hex(conditional_key(claim, conditions)).substr(0, 8), nullptr, 16) %
                            11);
}

/// Chat backend answering scoring prompts: the final score is
/// `table[key]` when present, else scripted_rubric(claim, conditions).
inline std::shared_ptr<CallbackChat> scripted_scorer(std::map<std::string, int> table = {}) {
    return std::make_shared<CallbackChat>([table = std::move(table)](const ChatRequest& req) {
        const auto v = view_scoring_prompt(req.prompt);
        const auto key = conditional_key(v.hypothesis, v.conditions);
        const auto it = table.find(key);
        const int last = it != table.end() ? it->second : scripted_rubric(v.hypothesis, v.conditions);
        return scoring_response(v.information.size(), last);
    });
}

/// Random tree: depth <= max_depth, internal nodes have 2..max_fanout
/// children, claims are "claim <id>". Non-root nodes are pruned with
/// probability `prune_p`, but at least one leaf always survives.
inline TreeNode random_tree(std::mt19937_64& rng, int max_depth, int max_fanout, double prune_p = 0.0,
                            const std::string& root_id = "0") {
    std::function<TreeNode(const std::string&, int)> grow = [&](const std::string& id, int depth) {
        TreeNode n;
        n.id = id;
        n.claim = {"claim " + id, false};
        std::uniform_int_distribution<int> split(0, 2);
        if (depth < max_depth && (depth == 0 || split(rng) != 0)) {
            std::uniform_int_distribution<int> fan(2, max_fanout);
            const int k = fan(rng);
            for (int i = 0; i < k; ++i) n.children.push_back(grow(child_id(id, static_cast<std::size_t>(i)), depth + 1));
        } else {
            n.claim.atomic = true;
        }
        return n;
    };
    TreeNode root = grow(root_id, 0);
    if (prune_p > 0) {
        std::bernoulli_distribution prune(prune_p);
        visit(root, [&](TreeNode& n, int depth) {
            if (depth > 0 && prune(rng)) n.pruned = true;
        });
        if (leaves(root).empty()) {
            visit(root, [](TreeNode& n, int) { n.pruned = false; });
        }
    }
    return root;
}

/// Brute-force reading of the chain rule: each non-pruned leaf is conditioned
/// on every later non-pruned sibling of itself and of each of its ancestors
/// below the root, and the root probability is the product of those leaf
/// conditionals.
inline double oracle_product(const TreeNode& root, const std::function<double(const std::string&,
                                                                             const std::vector<std::string>&)>& score) {
    double product = 1.0;
    std::function<void(const TreeNode&, std::vector<const TreeNode*>)> walk = [&](const TreeNode& n,
                                                                                std::vector<const TreeNode*> path) {
        path.push_back(&n);
        if (n.children.empty()) {
            std::vector<std::string> conds;
            for (std::size_t d = 1; d < path.size(); ++d) {
                const auto& parent = *path[d - 1];
                bool after = false;
                for (const auto& sib : parent.children) {
                    if (&sib == path[d]) {
                        after = true;
                        continue;
                    }
                    if (after && !sib.pruned) conds.push_back(sib.claim.text);
                }
            }
            product *= score(n.claim.text, conds);
            return;
        }
        for (const auto& c : n.children)
            if (!c.pruned) walk(c, path);
    };
    walk(root, {});
    return product;
}

}  // namespace bonsai::testing
