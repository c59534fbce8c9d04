#include "bonsai/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>

#include "bonsai/error.hpp"
#include "bonsai/text.hpp"

namespace bonsai {

namespace {

int ramp(int k_lo, int k_hi, double m_lo, double m_hi, double x) {
    // Multiply before dividing so integer breakpoints land on exact integers.
    const double v = k_lo + (x - m_lo) * (k_hi - k_lo) / (m_hi - m_lo);
    return static_cast<int>(std::ceil(v));
}

}  // namespace

int frame_count(double seconds, const FrameSamplingParams& p) {
    require(std::isfinite(seconds) && seconds >= 0.0, "frame_count: duration must be non-negative");
    int n;
    if (seconds <= p.m1) n = p.k1;
    else if (seconds <= p.m2) n = ramp(p.k1, p.k2, p.m1, p.m2, seconds);
    else if (seconds <= p.m3) n = ramp(p.k2, p.k3, p.m2, p.m3, seconds);
    else n = p.k3;
    return std::clamp(n, p.k1, p.k3);
}

std::vector<double> frame_timestamps(double seconds, const FrameSamplingParams& p) {
    const int n = frame_count(seconds, p);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = (i + 0.5) * seconds / n;
    return out;
}

std::vector<SourceSpan> window_text(std::size_t line_count, int window, int stride) {
    require(window >= 1 && stride >= 1 && stride <= window, "window_text: require 1 <= stride <= window");
    require(line_count > 0, "window_text: empty document");
    std::vector<SourceSpan> spans;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = std::min(line_count, start + static_cast<std::size_t>(window));
        SourceSpan s;
        s.modality = SpanModality::text;
        s.start = static_cast<double>(start);
        s.end = static_cast<double>(end);
        spans.push_back(std::move(s));
        if (end == line_count) break;
        start += static_cast<std::size_t>(stride);
    }
    return spans;
}

std::vector<SourceSpan> window_text(std::span<const std::string> lines, int window, int stride) {
    return window_text(lines.size(), window, stride);
}

std::vector<std::string> parse_observations(std::string_view response) {
    if (text::is_not_applicable(response)) return {};
    std::vector<std::string> out;
    for (auto& item : text::enumerated_items(response)) {
        if (out.size() == 3) break;
        auto obs = text::strip_quotes(item);
        if (!obs.empty() && !text::is_not_applicable(obs)) out.push_back(std::move(obs));
    }
    if (out.empty() && !text::trim(response).empty() && text::enumerated_items(response).empty())
        throw Error(ErrorKind::parse, "extraction response is neither N/A nor an enumeration");
    return out;
}

std::string extraction_prompt(const SpanContent& content, std::string_view query, ExtractionStage stage,
                              const prompts::Templates& templates) {
    const std::string q(query);
    switch (content.span.modality) {
        case SpanModality::text:
        case SpanModality::transcript:
            return prompts::render(templates.extract_transcript, {{"question", q}, {"dialogue", content.text}});
        case SpanModality::video_frame:
            return prompts::render(stage == ExtractionStage::offline ? templates.extract_video : templates.extract_image,
                                   {{"question", q}});
        case SpanModality::image:
            return prompts::render(templates.extract_image, {{"question", q}});
    }
    return {};
}

std::vector<EvidenceFactor> extract_observations(const SpanContent& content, std::string_view query,
                                                 ExtractionStage stage, const RunConfig& config,
                                                 const Backends& backends, const prompts::Templates& templates,
                                                 const std::string& id_prefix) {
    const bool visual = content.span.modality == SpanModality::image ||
                        content.span.modality == SpanModality::video_frame;
    const auto& backend = visual ? backends.vision : backends.chat;
    require(backend != nullptr, "extract_observations: no backend for modality " + to_string(content.span.modality));

    ChatRequest req;
    req.prompt = extraction_prompt(content, query, stage, templates);
    req.image_refs = content.image_refs;
    req.max_tokens = config.max_tokens;
    const auto observations = parse_observations(backend->complete(req));

    std::vector<EvidenceFactor> out;
    for (std::size_t k = 0; k < observations.size(); ++k) {
        EvidenceFactor f;
        f.id = id_prefix + std::to_string(k);
        f.text = observations[k];
        f.span = content.span;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<TranscriptLine> parse_transcript(std::string_view document) {
    std::vector<TranscriptLine> out;
    const auto lines = text::split_lines(document);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) continue;
        const auto tab = lines[i].find('\t');
        if (tab == std::string::npos)
            throw Error(ErrorKind::parse, "transcript line " + std::to_string(i + 1) + ": expected start-seconds<TAB>text");
        const std::string ts = text::trim(lines[i].substr(0, tab));
        char* endp = nullptr;
        const double start = std::strtod(ts.c_str(), &endp);
        if (ts.empty() || endp != ts.c_str() + ts.size() || !std::isfinite(start) || start < 0)
            throw Error(ErrorKind::parse, "transcript line " + std::to_string(i + 1) + ": bad start time '" + ts + "'");
        out.push_back({start, text::trim(lines[i].substr(tab + 1))});
    }
    return out;
}

SourceManifest manifest_from_json(const Json& j, const std::filesystem::path& base_dir) {
    SourceManifest m;
    m.base_dir = base_dir;
    const Json* sources = &j;
    if (j.is_object()) {
        if (auto it = j.find("question"); it != j.end() && it->is_string()) m.question = it->get<std::string>();
        auto it = j.find("sources");
        if (it == j.end()) throw Error(ErrorKind::parse, "manifest.sources: missing field");
        sources = &*it;
    }
    if (!sources->is_array()) throw Error(ErrorKind::parse, "manifest.sources: expected an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < sources->size(); ++i) {
        auto s = source_from_json((*sources)[i], "manifest.sources[" + std::to_string(i) + "]");
        if (!ids.insert(s.id).second) throw Error(ErrorKind::parse, "manifest: duplicate source id " + s.id);
        m.sources.push_back(std::move(s));
    }
    return m;
}

SourceManifest load_manifest(const std::filesystem::path& path) {
    return manifest_from_json(parse_json(read_file(path), path.string()),
                              std::filesystem::absolute(path).parent_path());
}

namespace {

std::filesystem::path resolve(const SourceManifest& m, const std::string& uri) {
    std::filesystem::path p(uri);
    return p.is_relative() ? m.base_dir / p : p;
}

struct Job {
    SpanContent content;
    std::size_t source_index = 0;
    std::size_t span_index = 0;
};

std::string grab_frame(const std::string& command_template, const std::string& uri, const std::string& source_id,
                       std::size_t index, double t) {
    const auto dir = std::filesystem::temp_directory_path() / "bonsai-frames";
    std::filesystem::create_directories(dir);
    const auto out = (dir / (source_id + "_" + std::to_string(index) + ".jpg")).string();
    const std::string cmd =
        prompts::render(command_template, {{"uri", uri}, {"t", text::format_fixed(t, 3)}, {"out", out}});
    if (std::system(cmd.c_str()) != 0) throw Error(ErrorKind::io, "frame grabber failed: " + cmd);
    return out;
}

/// Reads a source and cuts it into spans. Throws Error{io} on unreadable input.
void plan_source(const SourceManifest& m, std::size_t index, const RunConfig& config, SourceDescriptor& desc,
                 std::vector<Job>& jobs) {
    const auto& src = m.sources[index];
    desc = src;
    auto push = [&](SpanContent c, std::size_t span_index) {
        c.span.source_id = src.id;
        jobs.push_back({std::move(c), index, span_index});
    };
    switch (src.modality) {
        case SourceModality::text: {
            const auto lines = text::split_lines(read_file(resolve(m, src.uri)));
            if (lines.empty()) throw Error(ErrorKind::io, "empty document");
            desc.length = static_cast<double>(lines.size());
            const auto spans = window_text(lines, config.window, config.stride);
            for (std::size_t i = 0; i < spans.size(); ++i) {
                SpanContent c;
                c.span = spans[i];
                const auto b = static_cast<std::ptrdiff_t>(spans[i].start), e = static_cast<std::ptrdiff_t>(spans[i].end);
                c.text = text::join(std::vector<std::string>(lines.begin() + b, lines.begin() + e), "\n");
                push(std::move(c), i);
            }
            break;
        }
        case SourceModality::transcript: {
            const auto lines = parse_transcript(read_file(resolve(m, src.uri)));
            if (lines.empty()) throw Error(ErrorKind::io, "empty transcript");
            double last = 0.0;
            for (const auto& l : lines) last = std::max(last, l.start);
            desc.length = std::max(src.length, last);
            const auto spans = window_text(lines.size(), config.window, config.stride);
            for (std::size_t i = 0; i < spans.size(); ++i) {
                const auto b = static_cast<std::size_t>(spans[i].start), e = static_cast<std::size_t>(spans[i].end);
                SpanContent c;
                c.span.modality = SpanModality::transcript;
                double lo = lines[b].start, hi = lines[b].start;
                std::vector<std::string> window;
                for (std::size_t k = b; k < e; ++k) {
                    lo = std::min(lo, lines[k].start);
                    hi = std::max(hi, lines[k].start);
                    window.push_back(lines[k].text);
                }
                c.span.start = lo;
                c.span.end = hi;
                c.text = text::join(window, "\n");
                push(std::move(c), i);
            }
            break;
        }
        case SourceModality::image: {
            desc.length = 0.0;
            SpanContent c;
            c.span.modality = SpanModality::image;
            c.image_refs.push_back(resolve(m, src.uri).string());
            push(std::move(c), 0);
            break;
        }
        case SourceModality::video: {
            if (!config.frame_sampling) throw Error(ErrorKind::config, "video source but frame sampling is disabled");
            if (!(src.length >= 0.0)) throw Error(ErrorKind::io, "video length must be non-negative");
            const auto times = frame_timestamps(src.length, *config.frame_sampling);
            const std::string uri = resolve(m, src.uri).string();
            for (std::size_t i = 0; i < times.size(); ++i) {
                SpanContent c;
                c.span.modality = SpanModality::video_frame;
                c.span.start = c.span.end = times[i];
                c.image_refs.push_back(config.frame_grabber ? grab_frame(*config.frame_grabber, uri, src.id, i, times[i])
                                                            : uri + "#t=" + text::format_fixed(times[i], 3));
                push(std::move(c), i);
            }
            break;
        }
    }
}

}  // namespace

BankBuild build_bank(const SourceManifest& manifest, std::string_view context, ExtractionStage stage,
                     const RunConfig& config, const Backends& backends, const prompts::Templates& templates,
                     Exec exec, const std::string& id_prefix) {
    BankBuild out;
    std::vector<Job> jobs;
    out.bank.sources.resize(manifest.sources.size());
    for (std::size_t i = 0; i < manifest.sources.size(); ++i) {
        try {
            plan_source(manifest, i, config, out.bank.sources[i], jobs);
        } catch (const Error& e) {
            throw e.with_context("source " + manifest.sources[i].id);
        }
    }
    std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
        if (a.content.span.source_id != b.content.span.source_id)
            return a.content.span.source_id < b.content.span.source_id;
        return a.content.span.start < b.content.span.start;
    });

    std::vector<std::vector<EvidenceFactor>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    for_each_index(jobs.size(), exec, [&](std::size_t i) {
        const auto& job = jobs[i];
        const std::string prefix =
            id_prefix + job.content.span.source_id + "#" + std::to_string(job.span_index) + ".";
        try {
            results[i] = extract_observations(job.content, context, stage, config, backends, templates, prefix);
        } catch (const Error& e) {
            errors[i] = "source " + job.content.span.source_id + " span " + std::to_string(job.span_index) + ": " + e.what();
        }
    });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!errors[i].empty()) {
            out.warnings.push_back(errors[i]);
            continue;
        }
        for (auto& f : results[i]) {
            if (config.temporal_enhancement && is_temporal(f.span.modality)) {
                f.span.timestamp_label = text::hhmmss(f.span.start);
                f.text = *f.span.timestamp_label + " " + f.text;
            }
            out.bank.factors.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<std::string> validate_bank(const EvidenceBank& bank) {
    std::vector<std::string> out;
    std::map<std::string, const SourceDescriptor*> sources;
    for (const auto& s : bank.sources) sources[s.id] = &s;
    std::set<std::string> ids;
    for (const auto& f : bank.factors) {
        if (!ids.insert(f.id).second) out.push_back("duplicate factor id " + f.id);
        if (text::trim(f.text).empty()) out.push_back("factor " + f.id + " has empty text");
        auto it = sources.find(f.span.source_id);
        if (it == sources.end()) {
            out.push_back("factor " + f.id + " references unknown source " + f.span.source_id);
            continue;
        }
        if (!(f.span.start >= 0 && f.span.start <= f.span.end))
            out.push_back("factor " + f.id + " has an invalid span");
        if (f.span.end > it->second->length) out.push_back("factor " + f.id + " span ends past its source");
    }
    return out;
}

}  // namespace bonsai
