#include "bonsai/serialize.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bonsai/error.hpp"
#include "bonsai/text.hpp"
#include "json_fields.hpp"

namespace bonsai {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::parse: return "parse";
        case ErrorKind::backend: return "backend";
        case ErrorKind::transport: return "transport";
        case ErrorKind::script_miss: return "script_miss";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::not_found: return "not_found";
    }
    return "unknown";
}

using namespace detail;

// ---- enum names ------------------------------------------------------------

std::string to_string(SpanModality m) {
    switch (m) {
        case SpanModality::text: return "text";
        case SpanModality::image: return "image";
        case SpanModality::video_frame: return "video-frame";
        case SpanModality::transcript: return "transcript";
    }
    return "text";
}

std::string to_string(SourceModality m) {
    switch (m) {
        case SourceModality::text: return "text";
        case SourceModality::transcript: return "transcript";
        case SourceModality::image: return "image";
        case SourceModality::video: return "video";
    }
    return "text";
}

std::string to_string(EvidenceLevel v) { return v == EvidenceLevel::base ? "base" : "leaf"; }

std::string to_string(Aggregation v) {
    switch (v) {
        case Aggregation::product: return "product";
        case Aggregation::mean: return "mean";
        case Aggregation::judge: return "judge";
        case Aggregation::geometric_mean: return "geometric_mean";
    }
    return "product";
}

SpanModality span_modality_from_string(std::string_view s) {
    if (s == "text") return SpanModality::text;
    if (s == "image") return SpanModality::image;
    if (s == "video-frame") return SpanModality::video_frame;
    if (s == "transcript") return SpanModality::transcript;
    throw Error(ErrorKind::parse, "unknown span modality '" + std::string(s) + "'");
}

SourceModality source_modality_from_string(std::string_view s) {
    if (s == "text") return SourceModality::text;
    if (s == "transcript") return SourceModality::transcript;
    if (s == "image") return SourceModality::image;
    if (s == "video") return SourceModality::video;
    throw Error(ErrorKind::parse, "unknown source modality '" + std::string(s) + "'");
}

// ---- writers ---------------------------------------------------------------

Json to_json(const Claim& claim) { return Json{{"text", claim.text}, {"atomic", claim.atomic}}; }

Json to_json(const SourceSpan& span) {
    return Json{{"source_id", span.source_id},
                {"modality", to_string(span.modality)},
                {"start", span.start},
                {"end", span.end},
                {"timestamp_label", span.timestamp_label ? Json(*span.timestamp_label) : Json(nullptr)}};
}

Json to_json(const EvidenceFactor& f) {
    Json j{{"id", f.id},
           {"text", f.text},
           {"source_id", f.span.source_id},
           {"modality", to_string(f.span.modality)},
           {"start", f.span.start},
           {"end", f.span.end},
           {"timestamp_label", f.span.timestamp_label ? Json(*f.span.timestamp_label) : Json(nullptr)}};
    if (f.relevance) j["relevance"] = *f.relevance;
    return j;
}

Json to_json(const SourceDescriptor& s) {
    return Json{{"id", s.id}, {"modality", to_string(s.modality)}, {"uri", s.uri}, {"length", s.length}};
}

Json to_json(const ScoreTrace& t) {
    Json steps = Json::array();
    for (const auto& s : t.steps)
        steps.push_back(Json{{"factor_id", s.factor_id}, {"explanation", s.explanation}, {"score", s.score}});
    return Json{{"anchor_explanation", t.anchor_explanation},
                {"anchor_score", t.anchor_score},
                {"steps", std::move(steps)},
                {"final", t.final}};
}

Json to_json(const TreeNode& n) {
    Json children = Json::array();
    for (const auto& c : n.children) children.push_back(to_json(c));
    Json evidence = Json::array();
    for (const auto& f : n.evidence) evidence.push_back(to_json(f));
    return Json{{"id", n.id},
                {"claim", to_json(n.claim)},
                {"children", std::move(children)},
                {"score_trace", n.score_trace ? to_json(*n.score_trace) : Json(nullptr)},
                {"propagated_prob", opt_json(n.propagated_prob)},
                {"pruned", n.pruned},
                {"override_score", opt_json(n.override_score)},
                {"evidence", std::move(evidence)},
                {"conditioned_on", n.conditioned_on},
                {"warnings", n.warnings}};
}

// ---- readers ---------------------------------------------------------------

Claim claim_from_json(const Json& j, const std::string& path) {
    Claim c;
    c.text = get_string(j, path, "text");
    c.atomic = j.contains("atomic") ? get_bool(j, path, "atomic") : false;
    return c;
}

SourceSpan span_from_json(const Json& j, const std::string& path) {
    SourceSpan s;
    s.source_id = get_string(j, path, "source_id");
    try {
        s.modality = span_modality_from_string(get_string(j, path, "modality"));
    } catch (const Error& e) {
        bad(path + ".modality", e.what());
    }
    s.start = get_number(j, path, "start");
    s.end = get_number(j, path, "end");
    s.timestamp_label = opt_string(j, path, "timestamp_label");
    return s;
}

EvidenceFactor factor_from_json(const Json& j, const std::string& path) {
    EvidenceFactor f;
    f.id = get_string(j, path, "id");
    f.text = get_string(j, path, "text");
    f.span = span_from_json(j, path);
    f.relevance = opt_number(j, path, "relevance");
    return f;
}

SourceDescriptor source_from_json(const Json& j, const std::string& path) {
    SourceDescriptor s;
    s.id = get_string(j, path, "id");
    try {
        s.modality = source_modality_from_string(get_string(j, path, "modality"));
    } catch (const Error& e) {
        bad(path + ".modality", e.what());
    }
    s.uri = j.contains("uri") ? get_string(j, path, "uri") : std::string{};
    s.length = opt_number(j, path, "length").value_or(0.0);
    return s;
}

ScoreTrace trace_from_json(const Json& j, const std::string& path) {
    ScoreTrace t;
    t.anchor_explanation = get_string(j, path, "anchor_explanation");
    t.anchor_score = get_number(j, path, "anchor_score");
    const auto& steps = array_field(j, path, "steps", true);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string p = path + ".steps[" + std::to_string(i) + "]";
        AdjustmentStep s;
        s.factor_id = get_string(steps[i], p, "factor_id");
        s.explanation = get_string(steps[i], p, "explanation");
        s.score = get_number(steps[i], p, "score");
        t.steps.push_back(std::move(s));
    }
    t.final = get_number(j, path, "final");
    return t;
}

TreeNode tree_from_json(const Json& j, const std::string& path) {
    TreeNode n;
    n.id = get_string(j, path, "id");
    n.claim = claim_from_json(field(j, path, "claim"), path + ".claim");
    const auto& children = array_field(j, path, "children", true);
    for (std::size_t i = 0; i < children.size(); ++i)
        n.children.push_back(tree_from_json(children[i], path + ".children[" + std::to_string(i) + "]"));
    if (auto it = j.find("score_trace"); it != j.end() && !it->is_null())
        n.score_trace = trace_from_json(*it, path + ".score_trace");
    n.propagated_prob = opt_number(j, path, "propagated_prob");
    n.pruned = j.contains("pruned") ? get_bool(j, path, "pruned") : false;
    n.override_score = opt_number(j, path, "override_score");
    const auto& evidence = array_field(j, path, "evidence", false);
    for (std::size_t i = 0; i < evidence.size(); ++i)
        n.evidence.push_back(factor_from_json(evidence[i], path + ".evidence[" + std::to_string(i) + "]"));
    n.conditioned_on = string_list(j, path, "conditioned_on");
    n.warnings = string_list(j, path, "warnings");
    return n;
}

// ---- config ----------------------------------------------------------------

namespace {

Json frame_params_json(const FrameSamplingParams& p) {
    return Json{{"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}, {"m1", p.m1}, {"m2", p.m2}, {"m3", p.m3}};
}

int get_int(const Json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_number_integer()) bad(path + "." + key, "expected an integer");
    return v.get<int>();
}

template <class E>
E enum_field(const Json& j, const std::string& path, const char* key,
             std::initializer_list<std::pair<const char*, E>> names) {
    const std::string s = get_string(j, path, key);
    for (const auto& [name, value] : names)
        if (s == name) return value;
    bad(path + "." + key, "unknown value '" + s + "'");
}

}  // namespace

Json to_json(const RunConfig& c) {
    Json backends = Json::object();
    for (const auto& [name, spec] : c.backends) {
        Json b{{"type", spec.type}};
        if (!spec.script.empty()) b["script"] = spec.script;
        if (!spec.url.empty()) b["url"] = spec.url;
        if (!spec.model.empty()) b["model"] = spec.model;
        if (!spec.token_env.empty()) b["token_env"] = spec.token_env;
        b["retries"] = spec.retries;
        b["timeout_seconds"] = spec.timeout_seconds;
        backends[name] = std::move(b);
    }
    return Json{
        {"vb", c.vision_backend},
        {"db", c.decomposition_backend},
        {"sb", c.scoring_backend},
        {"rb", c.relevance_backend},
        {"eb", c.entailment_backend},
        {"fs", c.frame_sampling ? frame_params_json(*c.frame_sampling) : Json(false)},
        {"dm", c.decomposition_max},
        {"em", c.evidence_max},
        {"te", c.temporal_enhancement},
        {"el", to_string(c.evidence_level)},
        {"ag", to_string(c.aggregation)},
        {"tau", c.tau},
        {"theta", c.theta},
        {"window", c.window},
        {"stride", c.stride},
        {"rescale", c.rescale},
        {"rescale_rounds", c.rescale_rounds},
        {"scoring", c.scoring_mode == ScoringMode::single_call ? "single" : "multi"},
        {"conditioning", c.conditioning == ConditioningOrder::right ? "right" : "left"},
        {"summary", c.summary_mode == SummaryMode::generate ? "generate" : "question"},
        {"max_tokens", c.max_tokens},
        {"frame_grabber", c.frame_grabber ? Json(*c.frame_grabber) : Json(nullptr)},
        {"prompt_dir", c.prompt_dir ? Json(*c.prompt_dir) : Json(nullptr)},
        {"backends", std::move(backends)},
    };
}

RunConfig config_from_json(const Json& j, const std::string& path) {
    static const std::set<std::string> known = {
        "vb", "db", "sb", "rb", "eb", "fs", "dm", "em", "te", "el", "ag", "tau", "theta", "window", "stride",
        "rescale", "rescale_rounds", "scoring", "conditioning", "summary", "max_tokens", "frame_grabber",
        "prompt_dir", "backends"};
    if (!j.is_object()) bad(path, "expected an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) bad(path + "." + key, "unknown configuration key");

    RunConfig c;
    if (j.contains("vb")) c.vision_backend = get_string(j, path, "vb");
    if (j.contains("db")) c.decomposition_backend = get_string(j, path, "db");
    if (j.contains("sb")) c.scoring_backend = get_string(j, path, "sb");
    if (j.contains("rb")) c.relevance_backend = get_string(j, path, "rb");
    if (j.contains("eb")) c.entailment_backend = get_string(j, path, "eb");
    if (auto it = j.find("fs"); it != j.end()) {
        if (it->is_null() || (it->is_boolean() && !it->get<bool>())) {
            c.frame_sampling.reset();
        } else if ((it->is_boolean() && it->get<bool>()) || (it->is_string() && *it == "eq1")) {
            c.frame_sampling = FrameSamplingParams{};
        } else if (it->is_object()) {
            FrameSamplingParams p;
            const std::string fp = path + ".fs";
            if (it->contains("k1")) p.k1 = get_int(*it, fp, "k1");
            if (it->contains("k2")) p.k2 = get_int(*it, fp, "k2");
            if (it->contains("k3")) p.k3 = get_int(*it, fp, "k3");
            if (it->contains("m1")) p.m1 = get_number(*it, fp, "m1");
            if (it->contains("m2")) p.m2 = get_number(*it, fp, "m2");
            if (it->contains("m3")) p.m3 = get_number(*it, fp, "m3");
            c.frame_sampling = p;
        } else {
            bad(path + ".fs", "expected false, \"eq1\", or a parameter object");
        }
    }
    if (j.contains("dm")) c.decomposition_max = get_int(j, path, "dm");
    if (j.contains("em")) c.evidence_max = get_int(j, path, "em");
    if (j.contains("te")) c.temporal_enhancement = get_bool(j, path, "te");
    if (j.contains("el"))
        c.evidence_level = enum_field<EvidenceLevel>(j, path, "el", {{"base", EvidenceLevel::base}, {"leaf", EvidenceLevel::leaf}});
    if (j.contains("ag"))
        c.aggregation = enum_field<Aggregation>(j, path, "ag",
                                   {{"product", Aggregation::product},
                                    {"mean", Aggregation::mean},
                                    {"judge", Aggregation::judge},
                                    {"geometric_mean", Aggregation::geometric_mean}});
    if (j.contains("tau")) c.tau = get_number(j, path, "tau");
    if (j.contains("theta")) c.theta = get_number(j, path, "theta");
    if (j.contains("window")) c.window = get_int(j, path, "window");
    if (j.contains("stride")) c.stride = get_int(j, path, "stride");
    if (j.contains("rescale")) c.rescale = get_bool(j, path, "rescale");
    if (j.contains("rescale_rounds")) c.rescale_rounds = get_int(j, path, "rescale_rounds");
    if (j.contains("scoring"))
        c.scoring_mode = enum_field<ScoringMode>(j, path, "scoring",
                                    {{"single", ScoringMode::single_call}, {"multi", ScoringMode::multi_call}});
    if (j.contains("conditioning"))
        c.conditioning = enum_field<ConditioningOrder>(j, path, "conditioning",
                                    {{"right", ConditioningOrder::right}, {"left", ConditioningOrder::left}});
    if (j.contains("summary"))
        c.summary_mode = enum_field<SummaryMode>(j, path, "summary",
                                    {{"generate", SummaryMode::generate}, {"question", SummaryMode::question}});
    if (j.contains("max_tokens")) c.max_tokens = get_int(j, path, "max_tokens");
    c.frame_grabber = opt_string(j, path, "frame_grabber");
    c.prompt_dir = opt_string(j, path, "prompt_dir");
    if (auto it = j.find("backends"); it != j.end()) {
        if (!it->is_object()) bad(path + ".backends", "expected an object");
        for (const auto& [name, b] : it->items()) {
            const std::string bp = path + ".backends." + name;
            BackendSpec spec;
            spec.type = get_string(b, bp, "type");
            if (spec.type != "mock" && spec.type != "remote" && spec.type != "scoring")
                bad(bp + ".type", "expected mock, remote, or scoring");
            spec.script = opt_string(b, bp, "script").value_or("");
            spec.url = opt_string(b, bp, "url").value_or("");
            spec.model = opt_string(b, bp, "model").value_or("");
            spec.token_env = opt_string(b, bp, "token_env").value_or("");
            if (b.contains("retries")) spec.retries = get_int(b, bp, "retries");
            if (b.contains("timeout_seconds")) spec.timeout_seconds = get_int(b, bp, "timeout_seconds");
            c.backends[name] = std::move(spec);
        }
    }
    return c;
}

void validate_config(const RunConfig& c) {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw Error(ErrorKind::config, msg);
    };
    if (c.frame_sampling) {
        const auto& p = *c.frame_sampling;
        check(p.k1 >= 1, "fs: k1 must be >= 1");
        check(p.k1 <= p.k2 && p.k2 <= p.k3, "fs: require k1 <= k2 <= k3");
        check(p.m1 >= 0 && p.m1 < p.m2 && p.m2 < p.m3, "fs: require 0 <= m1 < m2 < m3");
    }
    check(c.decomposition_max >= 1, "dm must be >= 1");
    check(c.evidence_max >= 1, "em must be >= 1");
    check(c.tau >= 0 && c.tau <= 1, "tau must lie in [0,1]");
    check(c.theta >= 0 && c.theta <= 1, "theta must lie in [0,1]");
    check(c.window >= 1 && c.stride >= 1 && c.stride <= c.window, "require 1 <= stride <= window");
    check(c.rescale_rounds >= 0, "rescale_rounds must be >= 0");
    check(c.max_tokens >= 1, "max_tokens must be >= 1");
}

// ---- documents -------------------------------------------------------------

Json parse_json(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::parse, what + ": malformed document (" + e.what() + ")");
    }
}

std::string serialize_tree(const TreeNode& tree) { return to_json(tree).dump(2) + "\n"; }

TreeNode deserialize_tree(std::string_view document) { return tree_from_json(parse_json(document, "tree"), "tree"); }

Json bank_to_json(const EvidenceBank& bank) {
    Json sources = Json::array();
    for (const auto& s : bank.sources) sources.push_back(to_json(s));
    Json factors = Json::array();
    for (const auto& f : bank.factors) factors.push_back(to_json(f));
    return Json{{"sources", std::move(sources)}, {"factors", std::move(factors)}};
}

EvidenceBank bank_from_json(const Json& j, const std::string& path) {
    EvidenceBank bank;
    const auto& sources = array_field(j, path, "sources", true);
    for (std::size_t i = 0; i < sources.size(); ++i)
        bank.sources.push_back(source_from_json(sources[i], path + ".sources[" + std::to_string(i) + "]"));
    const auto& factors = array_field(j, path, "factors", true);
    for (std::size_t i = 0; i < factors.size(); ++i)
        bank.factors.push_back(factor_from_json(factors[i], path + ".factors[" + std::to_string(i) + "]"));
    return bank;
}

std::string serialize_bank(const EvidenceBank& bank) {
    std::string out;
    for (const auto& s : bank.sources) out += to_json(s).dump() + "\n";
    for (const auto& f : bank.factors) out += to_json(f).dump() + "\n";
    return out;
}

EvidenceBank deserialize_bank(std::string_view document) {
    EvidenceBank bank;
    const auto lines = text::split_lines(document);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        const std::string path = "bank line " + std::to_string(i + 1);
        const Json j = parse_json(lines[i], path);
        if (!j.is_object()) bad(path, "expected an object");
        if (j.contains("source_id")) bank.factors.push_back(factor_from_json(j, path));
        else bank.sources.push_back(source_from_json(j, path));
    }
    return bank;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c = config_from_json(parse_json(read_file(path), path.string()), "config");
    validate_config(c);
    const auto base = std::filesystem::absolute(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    for (auto& [_, spec] : c.backends) resolve(spec.script);
    if (c.prompt_dir) resolve(*c.prompt_dir);
    return c;
}

}  // namespace bonsai
