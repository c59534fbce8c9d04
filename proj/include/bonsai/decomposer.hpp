#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// Parsed decomposition response: either atomic ("N/A") or at least two claims.
struct Decomposition {
    bool atomic = false;
    std::vector<std::string> claims;
};

/// Parses the decomposition prompt's answer. Splits of three or more are kept.
/// Throws Error{parse} when the response is neither N/A nor a >=2-item enumeration.
Decomposition parse_decomposition(std::string_view response);

std::string decomposition_prompt(const prompts::Templates& templates, std::string_view statement);

/// Recursively decomposes `root` until claims are atomic or depth reaches
/// config.decomposition_max (root depth 0). Ids are path strings starting at
/// `root_id`. A malformed response turns that node into a leaf with a warning;
/// backend errors propagate with the node id. Nodes on one level are
/// decomposed together (in parallel when exec is parallel).
TreeNode build_tree(const Claim& root, const RunConfig& config, const Backends& backends,
                    const prompts::Templates& templates = prompts::Templates::defaults(),
                    Exec exec = Exec::parallel, std::string root_id = "0");

}  // namespace bonsai
