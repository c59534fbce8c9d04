#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bonsai/parallel.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

struct ChatRequest {
    std::string prompt;
    std::vector<std::string> image_refs;
    double temperature = 0.0;
    int max_tokens = 1024;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Model text for the request. Throws Error{transport} on connection
    /// failures and Error{script_miss} when a mock has no entry.
    virtual std::string complete(const ChatRequest& request) const = 0;
};

class RelevanceBackend {
public:
    virtual ~RelevanceBackend() = default;
    /// One score per candidate, order-aligned; higher is more relevant.
    virtual std::vector<double> relevance(std::string_view query, std::span<const std::string> candidates) const = 0;
};

class EntailmentBackend {
public:
    virtual ~EntailmentBackend() = default;
    /// Probability that `premise` entails `hypothesis`.
    virtual double entailment(std::string_view premise, std::string_view hypothesis) const = 0;
};

/// Token-overlap Jaccard |Q ∩ C| / |Q ∪ C| over lowercased word sets.
double jaccard(std::span<const std::string> query_tokens, std::span<const std::string> candidate_tokens);

/// Jaccard of `query` against every candidate. The parallel path splits the
/// candidates across OpenMP threads; the serial path is the reference.
std::vector<double> lexical_relevance(std::string_view query, std::span<const std::string> candidates,
                                      Exec exec = Exec::parallel);

/// Deterministic relevance used when no cross-encoder service is configured.
class LexicalRelevance final : public RelevanceBackend {
public:
    explicit LexicalRelevance(Exec exec = Exec::parallel) : exec_(exec) {}
    std::vector<double> relevance(std::string_view query, std::span<const std::string> candidates) const override;

private:
    Exec exec_;
};

/// Scripted responses for tests and offline runs.
///
/// Chat lookup, in order: exact table keyed by fnv1a_hex(key), then `rules`
/// in order, where a rule matches when every one of its substrings occurs in
/// the key. The key is the prompt, followed by one "\n[image] <ref>" line per
/// attached image. A miss throws Error{script_miss} carrying the key hash.
struct MockScript {
    struct Rule {
        std::vector<std::string> contains;
        std::string response;
    };
    struct Relevance {
        std::optional<std::string> query;  // nullopt matches any query
        std::string candidate;
        double score = 0.0;
    };
    struct Entailment {
        std::string premise;
        std::string hypothesis;
        double score = 0.0;
    };

    std::map<std::string, std::string> chat;  // hash -> response
    std::vector<Rule> rules;
    std::vector<Relevance> relevance;
    std::vector<Entailment> entailment;

    MockScript& on_prompt(std::string_view prompt, std::string response);
    MockScript& on_contains(std::vector<std::string> needles, std::string response);
    MockScript& on_relevance(std::string candidate, double score, std::optional<std::string> query = std::nullopt);
    MockScript& on_entailment(std::string premise, std::string hypothesis, double score);

    static MockScript load(const std::filesystem::path& path);
    static MockScript from_json_text(std::string_view text, const std::string& what = "mock script");
};

std::string mock_key(const ChatRequest& request);

/// Pure, lock-free mock serving every role. Relevance falls back to lexical
/// Jaccard for unscripted candidates; entailment falls back to 1 for
/// identical (trimmed) strings and 0 otherwise.
class MockBackend final : public ChatBackend, public RelevanceBackend, public EntailmentBackend {
public:
    explicit MockBackend(MockScript script = {});

    std::string complete(const ChatRequest& request) const override;
    std::vector<double> relevance(std::string_view query, std::span<const std::string> candidates) const override;
    double entailment(std::string_view premise, std::string_view hypothesis) const override;

    std::size_t chat_calls() const { return chat_calls_.load(); }

private:
    MockScript script_;
    mutable std::atomic<std::size_t> chat_calls_{0};
};

/// Chat backend driven by a callback. Test fixtures use it to compute
/// responses from prompt content.
class CallbackChat final : public ChatBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit CallbackChat(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const ChatRequest& request) const override { return fn_(request); }

private:
    Fn fn_;
};

/// Sentinel that fails on any call and counts attempts. Used to prove a code
/// path performs no model traffic.
class FailingBackend final : public ChatBackend, public RelevanceBackend, public EntailmentBackend {
public:
    std::string complete(const ChatRequest& request) const override;
    std::vector<double> relevance(std::string_view query, std::span<const std::string> candidates) const override;
    double entailment(std::string_view premise, std::string_view hypothesis) const override;

    std::size_t calls() const { return calls_.load(); }

private:
    mutable std::atomic<std::size_t> calls_{0};
};

/// OpenAI-style chat completion over HTTP: a single user message with optional
/// image parts, temperature and max_tokens. The bearer token is read from the
/// environment variable named in the spec.
class RemoteChat final : public ChatBackend {
public:
    explicit RemoteChat(BackendSpec spec);
    std::string complete(const ChatRequest& request) const override;

    /// Request body sent for `request`. Exposed for wire-format tests.
    std::string request_body(const ChatRequest& request) const;

private:
    BackendSpec spec_;
};

/// Cross-encoder style scoring service. POST <url>/relevance and
/// POST <url>/entailment both take {query, candidates} and return {scores}.
/// Entailment sends the premise as `query` and the hypothesis as the only
/// candidate.
class RemoteScoring final : public RelevanceBackend, public EntailmentBackend {
public:
    explicit RemoteScoring(BackendSpec spec);
    std::vector<double> relevance(std::string_view query, std::span<const std::string> candidates) const override;
    double entailment(std::string_view premise, std::string_view hypothesis) const override;

private:
    std::vector<double> post_scores(const std::string& route, std::string_view query,
                                    std::span<const std::string> candidates) const;
    BackendSpec spec_;
};

/// Backends resolved for one run.
struct Backends {
    std::shared_ptr<const ChatBackend> chat;    // decomposition, hypotheses, summaries, judge
    std::shared_ptr<const ChatBackend> vision;  // image and frame extraction
    std::shared_ptr<const ChatBackend> scorer;  // likelihood scoring
    std::shared_ptr<const RelevanceBackend> relevance;
    std::shared_ptr<const EntailmentBackend> entailment;

    /// Every role bound to one backend object.
    template <class B>
    static Backends all(std::shared_ptr<B> b) {
        return Backends{b, b, b, b, b};
    }
};

/// Named backends per role. "lexical" always resolves for relevance.
class BackendRegistry {
public:
    BackendRegistry();

    void add_chat(const std::string& name, std::shared_ptr<const ChatBackend> backend);
    void add_relevance(const std::string& name, std::shared_ptr<const RelevanceBackend> backend);
    void add_entailment(const std::string& name, std::shared_ptr<const EntailmentBackend> backend);
    /// Registers `backend` under `name` for every role.
    void add_mock(const std::string& name, std::shared_ptr<const MockBackend> backend);

    /// Throws Error{config} naming the first backend name that does not resolve.
    Backends resolve(const RunConfig& config) const;

    /// Builds the registry described by `config.backends`. A "mock" backend is
    /// always present; `script_override` replaces its script.
    static BackendRegistry from_config(const RunConfig& config,
                                       const std::optional<std::filesystem::path>& script_override = std::nullopt);

private:
    std::map<std::string, std::shared_ptr<const ChatBackend>> chat_;
    std::map<std::string, std::shared_ptr<const RelevanceBackend>> relevance_;
    std::map<std::string, std::shared_ptr<const EntailmentBackend>> entailment_;
};

}  // namespace bonsai
