#include "bonsai/decomposer.hpp"

#include "bonsai/error.hpp"
#include "bonsai/text.hpp"
#include "bonsai/tree.hpp"

namespace bonsai {

Decomposition parse_decomposition(std::string_view response) {
    if (text::is_not_applicable(response)) return {true, {}};
    Decomposition d;
    for (auto& item : text::enumerated_items(response)) {
        auto claim = text::strip_quotes(item);
        if (!claim.empty()) d.claims.push_back(std::move(claim));
    }
    if (d.claims.size() < 2) {
        throw Error(ErrorKind::parse, "decomposition response is neither N/A nor an enumeration of two or more claims: \"" +
                                          text::trim(response).substr(0, 120) + "\"");
    }
    return d;
}

std::string decomposition_prompt(const prompts::Templates& templates, std::string_view statement) {
    return prompts::render(templates.decomposition, {{"statement", std::string(statement)}});
}

TreeNode build_tree(const Claim& root, const RunConfig& config, const Backends& backends,
                    const prompts::Templates& templates, Exec exec, std::string root_id) {
    require(backends.chat != nullptr, "build_tree: no chat backend");
    require(!text::trim(root.text).empty(), "build_tree: root claim is empty");

    TreeNode tree;
    tree.id = std::move(root_id);
    tree.claim = {text::trim(root.text), false};

    std::vector<TreeNode*> frontier{&tree};
    for (int depth = 0; depth < config.decomposition_max && !frontier.empty(); ++depth) {
        // Decompose one level at a time; children are attached after the whole
        // level resolves so node addresses stay stable while workers run.
        std::vector<Decomposition> results(frontier.size());
        std::vector<std::string> warnings(frontier.size());
        for_each_index(frontier.size(), exec, [&](std::size_t i) {
            TreeNode& node = *frontier[i];
            ChatRequest req;
            req.prompt = decomposition_prompt(templates, node.claim.text);
            req.max_tokens = config.max_tokens;
            std::string response;
            try {
                response = backends.chat->complete(req);
            } catch (const Error& e) {
                throw e.with_context("decomposing node " + node.id);
            }
            try {
                results[i] = parse_decomposition(response);
            } catch (const Error& e) {
                warnings[i] = e.what();
            }
        });

        std::vector<TreeNode*> next;
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            TreeNode& node = *frontier[i];
            if (!warnings[i].empty()) {
                node.warnings.push_back(warnings[i]);
                continue;
            }
            if (results[i].atomic) {
                node.claim.atomic = true;
                continue;
            }
            node.children.reserve(results[i].claims.size());
            for (std::size_t c = 0; c < results[i].claims.size(); ++c) {
                TreeNode child;
                child.id = child_id(node.id, c);
                child.claim = {results[i].claims[c], false};
                node.children.push_back(std::move(child));
            }
        }
        for (auto* node : frontier)
            for (auto& child : node->children) next.push_back(&child);
        frontier = std::move(next);
    }
    return tree;
}

}  // namespace bonsai
