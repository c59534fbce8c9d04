#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// Frames to sample from a clip of `seconds` length: k1 up to m1, linear ramps
/// (rounded up) to k2 at m2 and k3 at m3, then k3. Throws on negative input.
int frame_count(double seconds, const FrameSamplingParams& params = {});

/// Centre-of-bucket timestamps (i + 0.5) * seconds / n for the frame_count
/// frames. A zero-length clip yields a single timestamp at 0.
std::vector<double> frame_timestamps(double seconds, const FrameSamplingParams& params = {});

/// Overlapping line windows [start, end) starting at 0, stride, 2*stride, ...
/// until one reaches the last line. Requires 1 <= stride <= window.
std::vector<SourceSpan> window_text(std::span<const std::string> lines, int window, int stride);
std::vector<SourceSpan> window_text(std::size_t line_count, int window, int stride);

/// Offline extraction uses the base question as context; test-time extraction
/// uses a claim (e.g. the leaf sub-claims during evidence rescaling).
enum class ExtractionStage { offline, test_time };

/// One unit of grounding material handed to an extractor.
struct SpanContent {
    SourceSpan span;
    std::string text;                     // text/transcript window
    std::vector<std::string> image_refs;  // image or sampled frame
};

/// "(1) ... (2) ... (3) ..." into at most three observations; N/A yields none.
std::vector<std::string> parse_observations(std::string_view response);

std::string extraction_prompt(const SpanContent& content, std::string_view query, ExtractionStage stage,
                              const prompts::Templates& templates);

/// Observations for one span. Factor ids are `<id_prefix><k>` for k = 0, 1, 2.
std::vector<EvidenceFactor> extract_observations(const SpanContent& content, std::string_view query,
                                                 ExtractionStage stage, const RunConfig& config,
                                                 const Backends& backends, const prompts::Templates& templates,
                                                 const std::string& id_prefix);

struct TranscriptLine {
    double start = 0.0;
    std::string text;
};

/// "start-seconds<TAB>text" lines. Blank lines are skipped.
std::vector<TranscriptLine> parse_transcript(std::string_view document);

/// Grounding sources plus an optional base question. Relative uris resolve
/// against `base_dir`.
struct SourceManifest {
    std::optional<std::string> question;
    std::vector<SourceDescriptor> sources;
    std::filesystem::path base_dir;
};

/// Accepts {"question": ..., "sources": [...]} or a bare array of sources.
SourceManifest manifest_from_json(const Json& j, const std::filesystem::path& base_dir);
SourceManifest load_manifest(const std::filesystem::path& path);

struct BankBuild {
    EvidenceBank bank;
    std::vector<std::string> warnings;  // per-span extraction failures (span skipped)
};

/// Windows text and transcripts, frame-samples videos, passes images whole,
/// extracts observations per span and merges them ordered by
/// (source_id, span.start). With temporal enhancement, temporal factors get a
/// "HH:MM:SS " prefix and a timestamp label. An unreadable source aborts the
/// build with its id.
BankBuild build_bank(const SourceManifest& manifest, std::string_view context, ExtractionStage stage,
                     const RunConfig& config, const Backends& backends,
                     const prompts::Templates& templates = prompts::Templates::defaults(),
                     Exec exec = Exec::parallel, const std::string& id_prefix = "");

/// EvidenceBank invariant violations (unique ids, known sources, span bounds).
std::vector<std::string> validate_bank(const EvidenceBank& bank);

}  // namespace bonsai
