#include "bonsai/backends.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "httplib.h"

#include "bonsai/error.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/text.hpp"

namespace bonsai {

// ---- lexical relevance -----------------------------------------------------

double jaccard(std::span<const std::string> q, std::span<const std::string> c) {
    if (q.empty() && c.empty()) return 0.0;
    std::size_t i = 0, j = 0, inter = 0;
    while (i < q.size() && j < c.size()) {
        if (q[i] < c[j]) ++i;
        else if (c[j] < q[i]) ++j;
        else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = q.size() + c.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> lexical_relevance(std::string_view query, std::span<const std::string> candidates, Exec exec) {
    const auto q = text::token_set(query);
    std::vector<double> scores(candidates.size());
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = jaccard(q, text::token_set(candidates[i]));
        return scores;
    }
    const auto n = static_cast<long>(candidates.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        scores[idx] = jaccard(q, text::token_set(candidates[idx]));
    }
    return scores;
}

std::vector<double> LexicalRelevance::relevance(std::string_view query, std::span<const std::string> candidates) const {
    require(!candidates.empty(), "relevance: candidate list is empty");
    return lexical_relevance(query, candidates, exec_);
}

// ---- mock ------------------------------------------------------------------

MockScript& MockScript::on_prompt(std::string_view prompt, std::string response) {
    chat[text::fnv1a_hex(prompt)] = std::move(response);
    return *this;
}

MockScript& MockScript::on_contains(std::vector<std::string> needles, std::string response) {
    rules.push_back({std::move(needles), std::move(response)});
    return *this;
}

MockScript& MockScript::on_relevance(std::string candidate, double score, std::optional<std::string> query) {
    relevance.push_back({std::move(query), std::move(candidate), score});
    return *this;
}

MockScript& MockScript::on_entailment(std::string premise, std::string hypothesis, double score) {
    entailment.push_back({std::move(premise), std::move(hypothesis), score});
    return *this;
}

MockScript MockScript::from_json_text(std::string_view text, const std::string& what) {
    const Json j = parse_json(text, what);
    auto bad = [&](const std::string& field, const std::string& msg) {
        throw Error(ErrorKind::parse, what + ": " + field + ": " + msg);
    };
    if (!j.is_object()) bad("(root)", "expected an object");
    MockScript s;
    if (auto it = j.find("chat"); it != j.end()) {
        if (!it->is_object()) bad("chat", "expected an object of hash -> response");
        for (const auto& [hash, response] : it->items()) {
            if (!response.is_string()) bad("chat." + hash, "expected a string");
            s.chat[hash] = response.get<std::string>();
        }
    }
    if (auto it = j.find("prompts"); it != j.end()) {
        // Convenience form: literal prompt -> response, hashed on load.
        if (!it->is_object()) bad("prompts", "expected an object of prompt -> response");
        for (const auto& [prompt, response] : it->items()) {
            if (!response.is_string()) bad("prompts", "expected string responses");
            s.on_prompt(prompt, response.get<std::string>());
        }
    }
    if (auto it = j.find("rules"); it != j.end()) {
        if (!it->is_array()) bad("rules", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& r = (*it)[i];
            const std::string p = "rules[" + std::to_string(i) + "]";
            if (!r.is_object() || !r.contains("contains") || !r.contains("response")) bad(p, "expected {contains, response}");
            Rule rule;
            const auto& c = r["contains"];
            if (c.is_string()) rule.contains.push_back(c.get<std::string>());
            else if (c.is_array()) {
                for (const auto& n : c) {
                    if (!n.is_string()) bad(p + ".contains", "expected strings");
                    rule.contains.push_back(n.get<std::string>());
                }
            } else bad(p + ".contains", "expected a string or array of strings");
            if (!r["response"].is_string()) bad(p + ".response", "expected a string");
            rule.response = r["response"].get<std::string>();
            s.rules.push_back(std::move(rule));
        }
    }
    if (auto it = j.find("relevance"); it != j.end()) {
        if (!it->is_array()) bad("relevance", "expected an array");
        for (const auto& r : *it) {
            if (!r.is_object() || !r.contains("candidate") || !r.contains("score")) bad("relevance", "expected {candidate, score[, query]}");
            Relevance rel;
            if (r.contains("query")) rel.query = r["query"].get<std::string>();
            rel.candidate = r["candidate"].get<std::string>();
            rel.score = r["score"].get<double>();
            s.relevance.push_back(std::move(rel));
        }
    }
    if (auto it = j.find("entailment"); it != j.end()) {
        if (!it->is_array()) bad("entailment", "expected an array");
        for (const auto& r : *it) {
            if (!r.is_object() || !r.contains("premise") || !r.contains("hypothesis") || !r.contains("score"))
                bad("entailment", "expected {premise, hypothesis, score}");
            s.entailment.push_back(
                {r["premise"].get<std::string>(), r["hypothesis"].get<std::string>(), r["score"].get<double>()});
        }
    }
    return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    return from_json_text(read_file(path), path.string());
}

std::string mock_key(const ChatRequest& request) {
    std::string key = request.prompt;
    for (const auto& ref : request.image_refs) key += "\n[image] " + ref;
    return key;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

std::string MockBackend::complete(const ChatRequest& request) const {
    chat_calls_.fetch_add(1, std::memory_order_relaxed);
    require(!request.prompt.empty(), "complete: prompt is empty");
    const std::string key = mock_key(request);
    const std::string hash = text::fnv1a_hex(key);
    if (auto it = script_.chat.find(hash); it != script_.chat.end()) return it->second;
    for (const auto& rule : script_.rules) {
        const bool hit = std::all_of(rule.contains.begin(), rule.contains.end(),
                                     [&](const std::string& n) { return key.find(n) != std::string::npos; });
        if (hit) return rule.response;
    }
    std::string head = key.substr(0, 160);
    std::replace(head.begin(), head.end(), '\n', ' ');
    throw Error(ErrorKind::script_miss, "mock script has no response for prompt " + hash + " (\"" + head + "...\")");
}

std::vector<double> MockBackend::relevance(std::string_view query, std::span<const std::string> candidates) const {
    require(!candidates.empty(), "relevance: candidate list is empty");
    auto scores = lexical_relevance(query, candidates, Exec::serial);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (const auto& r : script_.relevance) {
            if (r.candidate == candidates[i] && (!r.query || *r.query == query)) {
                scores[i] = r.score;
                break;
            }
        }
    }
    return scores;
}

double MockBackend::entailment(std::string_view premise, std::string_view hypothesis) const {
    require(!text::trim(premise).empty() && !text::trim(hypothesis).empty(), "entailment: empty input");
    for (const auto& e : script_.entailment)
        if (e.premise == premise && e.hypothesis == hypothesis) return e.score;
    return text::trim(premise) == text::trim(hypothesis) ? 1.0 : 0.0;
}

std::string FailingBackend::complete(const ChatRequest&) const {
    calls_.fetch_add(1);
    throw Error(ErrorKind::backend, "backend call attempted on the failing sentinel");
}

std::vector<double> FailingBackend::relevance(std::string_view, std::span<const std::string>) const {
    calls_.fetch_add(1);
    throw Error(ErrorKind::backend, "backend call attempted on the failing sentinel");
}

double FailingBackend::entailment(std::string_view, std::string_view) const {
    calls_.fetch_add(1);
    throw Error(ErrorKind::backend, "backend call attempted on the failing sentinel");
}

// ---- remote ----------------------------------------------------------------

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorKind::config, "backend url must include a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::string join_path(const std::string& base, const std::string& route) {
    if (!base.empty() && base.back() == '/') return base.substr(0, base.size() - 1) + route;
    return base + route;
}

/// POSTs a JSON body with retries on transport failures and 5xx responses.
Json post_json(const BackendSpec& spec, const std::string& url, const Json& body) {
    const Endpoint ep = split_url(url);
    httplib::Headers headers;
    if (!spec.token_env.empty()) {
        if (const char* token = std::getenv(spec.token_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= spec.retries; ++attempt) {
        httplib::Client client(ep.origin);
        client.set_connection_timeout(std::min(10, spec.timeout_seconds));
        client.set_read_timeout(spec.timeout_seconds);
        client.set_write_timeout(spec.timeout_seconds);
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "cannot reach " + url + " (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status >= 500) {
            last_error = url + " returned HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400)
            throw Error(ErrorKind::backend, url + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            return Json::parse(res->body);
        } catch (const Json::parse_error&) {
            throw Error(ErrorKind::backend, url + " returned a non-JSON body");
        }
    }
    throw Error(ErrorKind::transport, last_error);
}

std::string image_url(const std::string& ref) {
    if (ref.starts_with("http://") || ref.starts_with("https://") || ref.starts_with("data:")) return ref;
    std::string mime = "image/jpeg";
    if (ref.ends_with(".png")) mime = "image/png";
    else if (ref.ends_with(".webp")) mime = "image/webp";
    return "data:" + mime + ";base64," + httplib::detail::base64_encode(read_file(ref));
}

}  // namespace

RemoteChat::RemoteChat(BackendSpec spec) : spec_(std::move(spec)) {
    if (spec_.url.empty()) throw Error(ErrorKind::config, "remote chat backend needs a url");
    split_url(spec_.url);
}

std::string RemoteChat::request_body(const ChatRequest& request) const {
    Json content;
    if (request.image_refs.empty()) {
        content = request.prompt;
    } else {
        content = Json::array();
        content.push_back(Json{{"type", "text"}, {"text", request.prompt}});
        for (const auto& ref : request.image_refs)
            content.push_back(Json{{"type", "image_url"}, {"image_url", Json{{"url", image_url(ref)}}}});
    }
    Json body{{"messages", Json::array({Json{{"role", "user"}, {"content", std::move(content)}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (!spec_.model.empty()) body["model"] = spec_.model;
    return body.dump();
}

std::string RemoteChat::complete(const ChatRequest& request) const {
    require(!request.prompt.empty(), "complete: prompt is empty");
    const Json reply = post_json(spec_, spec_.url, Json::parse(request_body(request)));
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception&) {
        throw Error(ErrorKind::backend, spec_.url + ": response has no choices[0].message.content");
    }
}

RemoteScoring::RemoteScoring(BackendSpec spec) : spec_(std::move(spec)) {
    if (spec_.url.empty()) throw Error(ErrorKind::config, "scoring backend needs a url");
    split_url(spec_.url);
}

std::vector<double> RemoteScoring::post_scores(const std::string& route, std::string_view query,
                                               std::span<const std::string> candidates) const {
    const std::string url = join_path(spec_.url, route);
    const Json reply = post_json(spec_, url,
                                 Json{{"query", std::string(query)},
                                      {"candidates", std::vector<std::string>(candidates.begin(), candidates.end())}});
    std::vector<double> scores;
    try {
        scores = reply.at("scores").get<std::vector<double>>();
    } catch (const Json::exception&) {
        throw Error(ErrorKind::backend, url + ": response has no numeric scores array");
    }
    if (scores.size() != candidates.size())
        throw Error(ErrorKind::backend, url + ": expected " + std::to_string(candidates.size()) + " scores, got " +
                                            std::to_string(scores.size()));
    return scores;
}

std::vector<double> RemoteScoring::relevance(std::string_view query, std::span<const std::string> candidates) const {
    require(!candidates.empty(), "relevance: candidate list is empty");
    return post_scores("/relevance", query, candidates);
}

double RemoteScoring::entailment(std::string_view premise, std::string_view hypothesis) const {
    require(!text::trim(premise).empty() && !text::trim(hypothesis).empty(), "entailment: empty input");
    const std::string h(hypothesis);
    return std::clamp(post_scores("/entailment", premise, std::span<const std::string>(&h, 1)).front(), 0.0, 1.0);
}

// ---- registry --------------------------------------------------------------

BackendRegistry::BackendRegistry() { add_relevance("lexical", std::make_shared<LexicalRelevance>()); }

void BackendRegistry::add_chat(const std::string& name, std::shared_ptr<const ChatBackend> backend) {
    chat_[name] = std::move(backend);
}
void BackendRegistry::add_relevance(const std::string& name, std::shared_ptr<const RelevanceBackend> backend) {
    relevance_[name] = std::move(backend);
}
void BackendRegistry::add_entailment(const std::string& name, std::shared_ptr<const EntailmentBackend> backend) {
    entailment_[name] = std::move(backend);
}
void BackendRegistry::add_mock(const std::string& name, std::shared_ptr<const MockBackend> backend) {
    add_chat(name, backend);
    add_relevance(name, backend);
    add_entailment(name, backend);
}

Backends BackendRegistry::resolve(const RunConfig& config) const {
    auto find = [](const auto& table, const std::string& name, const char* role) {
        auto it = table.find(name);
        if (it == table.end())
            throw Error(ErrorKind::config, std::string("no ") + role + " backend named '" + name + "'");
        return it->second;
    };
    Backends b;
    b.chat = find(chat_, config.decomposition_backend, "chat");
    b.vision = find(chat_, config.vision_backend, "vision");
    b.scorer = find(chat_, config.scorer_name(), "chat");
    b.relevance = find(relevance_, config.relevance_backend, "relevance");
    b.entailment = find(entailment_, config.entailment_backend, "entailment");
    return b;
}

BackendRegistry BackendRegistry::from_config(const RunConfig& config,
                                             const std::optional<std::filesystem::path>& script_override) {
    BackendRegistry reg;
    bool has_mock = false;
    for (const auto& [name, spec] : config.backends) {
        if (spec.type == "mock") {
            MockScript script;
            if (name == "mock" && script_override) script = MockScript::load(*script_override);
            else if (!spec.script.empty()) script = MockScript::load(spec.script);
            reg.add_mock(name, std::make_shared<MockBackend>(std::move(script)));
            has_mock = has_mock || name == "mock";
        } else if (spec.type == "remote") {
            reg.add_chat(name, std::make_shared<RemoteChat>(spec));
        } else if (spec.type == "scoring") {
            auto scoring = std::make_shared<RemoteScoring>(spec);
            reg.add_relevance(name, scoring);
            reg.add_entailment(name, scoring);
        }
    }
    if (!has_mock) {
        MockScript script = script_override ? MockScript::load(*script_override) : MockScript{};
        reg.add_mock("mock", std::make_shared<MockBackend>(std::move(script)));
    }
    return reg;
}

}  // namespace bonsai
