#include "bonsai/tree.hpp"

#include <cmath>
#include <unordered_set>

#include "bonsai/text.hpp"

namespace bonsai {

std::optional<Probability> TreeNode::effective_score() const {
    if (override_score) return override_score;
    if (score_trace) return score_trace->final;
    return std::nullopt;
}

bool is_temporal(SpanModality m) {
    return m == SpanModality::transcript || m == SpanModality::video_frame;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::empty_claim: return "empty_claim";
        case ViolationKind::untrimmed_claim: return "untrimmed_claim";
        case ViolationKind::atomic_with_children: return "atomic_with_children";
        case ViolationKind::depth_exceeded: return "depth_exceeded";
        case ViolationKind::duplicate_id: return "duplicate_id";
        case ViolationKind::empty_id: return "empty_id";
        case ViolationKind::probability_range: return "probability_range";
        case ViolationKind::trace_inconsistent: return "trace_inconsistent";
    }
    return "unknown";
}

namespace {

bool in_unit(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

std::vector<std::string> check_trace(const ScoreTrace& trace) {
    std::vector<std::string> out;
    if (!in_unit(trace.anchor_score)) out.push_back("anchor_score outside [0,1]");
    if (!in_unit(trace.final)) out.push_back("final outside [0,1]");
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& step = trace.steps[i];
        if (!in_unit(step.score)) out.push_back("step " + std::to_string(i + 1) + " score outside [0,1]");
        if (text::trim(step.explanation).empty())
            out.push_back("step " + std::to_string(i + 1) + " has an empty explanation");
    }
    const double expected = trace.steps.empty() ? trace.anchor_score : trace.steps.back().score;
    if (trace.final != expected) out.push_back("final does not equal the last adjustment");
    return out;
}

std::vector<Violation> validate_tree(const TreeNode& tree, const RunConfig& config) {
    std::vector<Violation> out;
    std::unordered_set<std::string> seen;
    auto add = [&](const TreeNode& n, ViolationKind k, std::string msg) {
        out.push_back({n.id, k, std::move(msg)});
    };
    visit(tree, [&](const TreeNode& n, int depth) {
        if (n.id.empty()) add(n, ViolationKind::empty_id, "node id is empty");
        else if (!seen.insert(n.id).second) add(n, ViolationKind::duplicate_id, "duplicate node id " + n.id);

        if (n.claim.text.empty()) add(n, ViolationKind::empty_claim, "claim text is empty");
        else if (text::trim(n.claim.text) != n.claim.text)
            add(n, ViolationKind::untrimmed_claim, "claim text has surrounding whitespace");
        if (n.claim.atomic && !n.children.empty())
            add(n, ViolationKind::atomic_with_children, "atomic claim has children");
        if (depth > config.decomposition_max)
            add(n, ViolationKind::depth_exceeded,
                "depth " + std::to_string(depth) + " exceeds limit " + std::to_string(config.decomposition_max));
        if (n.propagated_prob && !in_unit(*n.propagated_prob))
            add(n, ViolationKind::probability_range, "propagated_prob outside [0,1]");
        if (n.override_score && !in_unit(*n.override_score))
            add(n, ViolationKind::probability_range, "override_score outside [0,1]");
        if (n.score_trace) {
            for (auto& msg : check_trace(*n.score_trace)) {
                const auto kind = msg.find("outside") != std::string::npos ? ViolationKind::probability_range
                                                                            : ViolationKind::trace_inconsistent;
                add(n, kind, msg);
            }
        }
    });
    return out;
}

namespace {

template <class Node, class Out>
void collect_leaves(Node& n, Out& out) {
    if (n.pruned) return;
    if (n.children.empty()) {
        out.push_back(&n);
        return;
    }
    for (auto& c : n.children) collect_leaves(c, out);
}

template <class Node, class Fn>
void visit_impl(Node& n, int depth, const Fn& fn) {
    fn(n, depth);
    for (auto& c : n.children) visit_impl(c, depth + 1, fn);
}

template <class Node>
Node* find_impl(Node& n, std::string_view id) {
    if (n.id == id) return &n;
    for (auto& c : n.children)
        if (auto* hit = find_impl(c, id)) return hit;
    return nullptr;
}

}  // namespace

std::vector<const TreeNode*> leaves(const TreeNode& tree) {
    std::vector<const TreeNode*> out;
    collect_leaves(tree, out);
    return out;
}

std::vector<TreeNode*> leaves(TreeNode& tree) {
    std::vector<TreeNode*> out;
    collect_leaves(tree, out);
    return out;
}

void visit(const TreeNode& tree, const std::function<void(const TreeNode&, int)>& fn) { visit_impl(tree, 0, fn); }
void visit(TreeNode& tree, const std::function<void(TreeNode&, int)>& fn) { visit_impl(tree, 0, fn); }

TreeNode* find_node(TreeNode& tree, std::string_view id) { return find_impl(tree, id); }
const TreeNode* find_node(const TreeNode& tree, std::string_view id) { return find_impl(tree, id); }

int tree_depth(const TreeNode& tree) {
    int depth = 0;
    visit(tree, [&](const TreeNode&, int d) { depth = std::max(depth, d); });
    return depth;
}

std::size_t node_count(const TreeNode& tree) {
    std::size_t n = 0;
    visit(tree, [&](const TreeNode&, int) { ++n; });
    return n;
}

std::string child_id(std::string_view parent, std::size_t index) {
    return std::string(parent) + "." + std::to_string(index);
}

}  // namespace bonsai
