#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bonsai {

/// Probabilities are stored as reals in [0,1]. Rubric integers (0..10) are
/// converted at the scoring boundary.
using Probability = double;

struct Claim {
    std::string text;
    bool atomic = false;

    bool operator==(const Claim&) const = default;
};

/// Modality of a grounding span.
enum class SpanModality { text, image, video_frame, transcript };

/// Modality of a whole grounding source listed in a manifest.
enum class SourceModality { text, transcript, image, video };

bool is_temporal(SpanModality m);

/// Where an observation came from. `start`/`end` are line indices ([start,end))
/// for text, seconds for transcripts and video frames, and 0 for images.
struct SourceSpan {
    std::string source_id;
    SpanModality modality = SpanModality::text;
    double start = 0.0;
    double end = 0.0;
    std::optional<std::string> timestamp_label;

    bool operator==(const SourceSpan&) const = default;
};

struct EvidenceFactor {
    std::string id;
    std::string text;
    SourceSpan span;
    std::optional<double> relevance;

    bool operator==(const EvidenceFactor&) const = default;
};

struct SourceDescriptor {
    std::string id;
    SourceModality modality = SourceModality::text;
    std::string uri;
    double length = 0.0;  // lines for text, seconds for transcripts/videos, 0 for images

    bool operator==(const SourceDescriptor&) const = default;
};

struct EvidenceBank {
    std::vector<EvidenceFactor> factors;
    std::vector<SourceDescriptor> sources;

    bool empty() const { return factors.empty(); }
    bool operator==(const EvidenceBank&) const = default;
};

struct AdjustmentStep {
    std::string factor_id;  // evidence factor id, or "cond:<node id>" for a conditioning claim
    std::string explanation;
    Probability score = 0.0;

    bool operator==(const AdjustmentStep&) const = default;
};

/// Anchor score followed by one adjustment per presented factor.
struct ScoreTrace {
    std::string anchor_explanation;
    Probability anchor_score = 0.0;
    std::vector<AdjustmentStep> steps;
    Probability final = 0.0;

    bool operator==(const ScoreTrace&) const = default;
};

struct TreeNode {
    std::string id;
    Claim claim;
    std::vector<TreeNode> children;
    std::optional<ScoreTrace> score_trace;
    std::optional<Probability> propagated_prob;
    bool pruned = false;
    /// Human correction of a leaf score. Kept next to the model trace, never replacing it.
    std::optional<Probability> override_score;
    /// Evidence presented to the scorer for this leaf, in presentation order.
    std::vector<EvidenceFactor> evidence;
    /// Ids of sibling-branch nodes whose claims this leaf was conditioned on.
    std::vector<std::string> conditioned_on;
    std::vector<std::string> warnings;

    bool is_leaf() const { return children.empty(); }
    /// Human override when present, else the model's final score.
    std::optional<Probability> effective_score() const;

    bool operator==(const TreeNode&) const = default;
};

struct FrameSamplingParams {
    int k1 = 1;
    int k2 = 6;
    int k3 = 10;
    double m1 = 3.0;
    double m2 = 20.0;
    double m3 = 40.0;

    bool operator==(const FrameSamplingParams&) const = default;
};

enum class EvidenceLevel { base, leaf };
enum class Aggregation { product, mean, judge, geometric_mean };
/// right: child i is conditioned on children i+1..n. left: on children 0..i-1.
enum class ConditioningOrder { right, left };
enum class ScoringMode { single_call, multi_call };
/// question: anchor summary is "someone is asking the question, <Q>"; generate: model summary.
enum class SummaryMode { generate, question };

/// A named model backend. type is one of "mock", "remote", "scoring".
struct BackendSpec {
    std::string type = "mock";
    std::string script;     // mock: script file
    std::string url;        // remote: chat completion endpoint; scoring: base URL
    std::string model;      // remote
    std::string token_env;  // remote: environment variable holding the bearer token
    int retries = 2;
    int timeout_seconds = 120;

    bool operator==(const BackendSpec&) const = default;
};

/// Run configuration. The short config keys (vb, db, fs, dm, em, te, el, ag)
/// name the experiment knobs; the rest are engine settings.
struct RunConfig {
    std::string vision_backend = "mock";         // vb
    std::string decomposition_backend = "mock";  // db
    std::string scoring_backend;                 // sb, empty = same as db
    std::string relevance_backend = "lexical";   // rb
    std::string entailment_backend = "mock";     // eb
    std::optional<FrameSamplingParams> frame_sampling = FrameSamplingParams{};  // fs
    int decomposition_max = 3;                   // dm
    int evidence_max = 3;                        // em
    bool temporal_enhancement = false;           // te
    EvidenceLevel evidence_level = EvidenceLevel::base;  // el
    Aggregation aggregation = Aggregation::product;      // ag

    double tau = 0.9;
    double theta = 0.5;
    int window = 8;
    int stride = 4;
    bool rescale = false;
    int rescale_rounds = 1;
    ScoringMode scoring_mode = ScoringMode::single_call;
    ConditioningOrder conditioning = ConditioningOrder::right;
    SummaryMode summary_mode = SummaryMode::generate;
    int max_tokens = 1024;
    std::optional<std::string> frame_grabber;
    std::optional<std::string> prompt_dir;
    std::map<std::string, BackendSpec> backends;

    const std::string& scorer_name() const {
        return scoring_backend.empty() ? decomposition_backend : scoring_backend;
    }

    bool operator==(const RunConfig&) const = default;
};

}  // namespace bonsai
