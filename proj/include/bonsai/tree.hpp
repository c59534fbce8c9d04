#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bonsai/types.hpp"

namespace bonsai {

enum class ViolationKind {
    empty_claim,
    untrimmed_claim,
    atomic_with_children,
    depth_exceeded,
    duplicate_id,
    empty_id,
    probability_range,
    trace_inconsistent,
};

struct Violation {
    std::string node_id;
    ViolationKind kind;
    std::string message;
};

std::string_view to_string(ViolationKind kind);

/// Checks every TreeNode invariant. Violations are data; an empty result means
/// the tree is valid under `config.decomposition_max`.
std::vector<Violation> validate_tree(const TreeNode& tree, const RunConfig& config);

/// Violations of a single score trace (ranges, final consistency, explanations).
std::vector<std::string> check_trace(const ScoreTrace& trace);

/// Non-pruned leaves in left-to-right order. Leaves under a pruned ancestor are
/// excluded along with the ancestor.
std::vector<const TreeNode*> leaves(const TreeNode& tree);
std::vector<TreeNode*> leaves(TreeNode& tree);

/// Preorder visit with depth (root depth 0).
void visit(const TreeNode& tree, const std::function<void(const TreeNode&, int)>& fn);
void visit(TreeNode& tree, const std::function<void(TreeNode&, int)>& fn);

TreeNode* find_node(TreeNode& tree, std::string_view id);
const TreeNode* find_node(const TreeNode& tree, std::string_view id);

int tree_depth(const TreeNode& tree);
std::size_t node_count(const TreeNode& tree);

/// Path id of child `index` of the node with id `parent`: "0" -> "0.1".
std::string child_id(std::string_view parent, std::size_t index);

}  // namespace bonsai
