#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "bonsai/types.hpp"

namespace bonsai {

using Json = nlohmann::json;

// Canonical JSON forms. Field names are the wire contract shared with the UI.
// Readers throw Error{parse} naming the offending field path.

Json to_json(const Claim& claim);
Json to_json(const SourceSpan& span);
Json to_json(const EvidenceFactor& factor);
Json to_json(const SourceDescriptor& source);
Json to_json(const ScoreTrace& trace);
Json to_json(const TreeNode& node);
Json to_json(const RunConfig& config);

Claim claim_from_json(const Json& j, const std::string& path = "claim");
SourceSpan span_from_json(const Json& j, const std::string& path = "span");
EvidenceFactor factor_from_json(const Json& j, const std::string& path = "factor");
SourceDescriptor source_from_json(const Json& j, const std::string& path = "source");
ScoreTrace trace_from_json(const Json& j, const std::string& path = "score_trace");
TreeNode tree_from_json(const Json& j, const std::string& path = "tree");
/// Missing keys keep their defaults. Unknown keys are rejected.
RunConfig config_from_json(const Json& j, const std::string& path = "config");

/// Throws Error{config} when a RunConfig invariant does not hold.
void validate_config(const RunConfig& config);

/// Pretty-printed tree document (one tree per file).
std::string serialize_tree(const TreeNode& tree);
TreeNode deserialize_tree(std::string_view document);

/// Bank document: one JSON record per line. Source records ({id, modality, uri,
/// length}) come first, then factor records ({id, text, source_id, modality,
/// start, end, timestamp_label[, relevance]}).
std::string serialize_bank(const EvidenceBank& bank);
EvidenceBank deserialize_bank(std::string_view document);

Json bank_to_json(const EvidenceBank& bank);
EvidenceBank bank_from_json(const Json& j, const std::string& path = "bank");

std::string to_string(SpanModality m);
std::string to_string(SourceModality m);
std::string to_string(EvidenceLevel v);
std::string to_string(Aggregation v);
SpanModality span_modality_from_string(std::string_view s);
SourceModality source_modality_from_string(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view content);

Json parse_json(std::string_view text, const std::string& what);

RunConfig load_config(const std::filesystem::path& path);

}  // namespace bonsai
