#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bonsai/counterfactual.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// A single-hypothesis run: one annotated tree scored against one bank.
struct TreeRun {
    int revision = 0;
    std::string hypothesis;
    TreeNode tree;
    Probability root_prob = 0.0;
    RunConfig config;
    EvidenceBank bank;
    std::string summary;
    std::vector<std::string> warnings;

    bool operator==(const TreeRun&) const = default;
};

/// What serve mode stores per run id. Documents carry "kind": "mcq" | "tree".
using RunDocument = std::variant<McqRun, TreeRun>;

Json to_json(const McqRun& run);
Json to_json(const TreeRun& run);
Json to_json(const RunDocument& doc);

McqRun mcq_run_from_json(const Json& j, const std::string& path = "run");
TreeRun tree_run_from_json(const Json& j, const std::string& path = "run");
RunDocument run_from_json(const Json& j, const std::string& path = "run");

/// Pretty-printed, newline-terminated document. Byte-stable for equal runs.
std::string serialize_run(const RunDocument& doc);
RunDocument deserialize_run(std::string_view document);

int& revision(RunDocument& doc);

}  // namespace bonsai
