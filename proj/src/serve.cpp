#include "bonsai/serve.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>

#include "httplib.h"

#include "bonsai/counterfactual.hpp"
#include "bonsai/error.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/text.hpp"
#include "bonsai/tree.hpp"

namespace bonsai {

namespace {

/// A request the service refuses, with its HTTP status.
struct Rejection {
    int status;
    std::string message;
};

ServiceResponse error_response(int status, const std::string& message) { return {status, Json{{"error", message}}}; }

int status_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::precondition:
        case ErrorKind::parse:
        case ErrorKind::config: return 400;
        case ErrorKind::backend:
        case ErrorKind::transport:
        case ErrorKind::script_miss: return 502;
        case ErrorKind::io: return 500;
    }
    return 500;
}

bool valid_run_id(std::string_view id) {
    if (id.empty() || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

/// The tree of `doc` containing `node_id`, and the node itself.
std::pair<TreeNode*, TreeNode*> locate(RunDocument& doc, const std::string& node_id) {
    if (auto* mcq = std::get_if<McqRun>(&doc)) {
        for (auto& tree : mcq->trees)
            if (auto* n = find_node(tree, node_id)) return {&tree, n};
    } else {
        auto& tree = std::get<TreeRun>(doc).tree;
        if (auto* n = find_node(tree, node_id)) return {&tree, n};
    }
    throw Rejection{404, "unknown node " + node_id};
}

std::string title(const RunDocument& doc) {
    if (const auto* mcq = std::get_if<McqRun>(&doc)) return mcq->question;
    return std::get<TreeRun>(doc).hypothesis;
}

}  // namespace

std::shared_ptr<const RunDocument> Service::Entry::snapshot() const {
    std::lock_guard lock(snapshot_guard);
    return doc;
}

void Service::Entry::publish(std::shared_ptr<const RunDocument> next) {
    std::lock_guard lock(snapshot_guard);
    doc = std::move(next);
}

Service::Service(std::filesystem::path state_dir, BackendFactory backends, prompts::Templates templates)
    : state_dir_(std::move(state_dir)), backends_(std::move(backends)), templates_(std::move(templates)) {
    std::error_code ec;
    std::filesystem::create_directories(state_dir_, ec);
    if (!std::filesystem::is_directory(state_dir_))
        throw Error(ErrorKind::io, "state directory " + state_dir_.string() + " is not usable");
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
    if (!valid_run_id(id)) return nullptr;
    std::lock_guard lock(index_guard_);
    if (auto it = runs_.find(id); it != runs_.end()) return it->second;
    const auto path = state_dir_ / (id + ".json");
    if (!std::filesystem::is_regular_file(path)) return nullptr;
    auto entry = std::make_shared<Entry>();
    try {
        entry->doc = std::make_shared<const RunDocument>(deserialize_run(read_file(path)));
    } catch (const Error& e) {
        throw e.with_context("run " + id);
    }
    runs_.emplace(id, entry);
    return entry;
}

ServiceResponse Service::list_runs() const {
    std::vector<std::string> ids;
    for (const auto& f : std::filesystem::directory_iterator(state_dir_))
        if (f.is_regular_file() && f.path().extension() == ".json") ids.push_back(f.path().stem().string());
    std::sort(ids.begin(), ids.end());
    Json runs = Json::array();
    for (const auto& id : ids) {
        try {
            auto entry = find(id);
            if (!entry) continue;
            const auto doc = entry->snapshot();
            runs.push_back({{"id", id},
                            {"kind", std::holds_alternative<McqRun>(*doc) ? "mcq" : "tree"},
                            {"revision", std::visit([](const auto& r) { return r.revision; }, *doc)},
                            {"title", title(*doc)}});
        } catch (const Error& e) {
            runs.push_back({{"id", id}, {"error", e.what()}});
        }
    }
    return {200, Json{{"runs", runs}}};
}

ServiceResponse Service::get_run(const std::string& id) const {
    auto entry = find(id);
    if (!entry) return error_response(404, "unknown run " + id);
    return {200, to_json(*entry->snapshot())};
}

ServiceResponse Service::mutate(const std::string& id, const std::function<void(RunDocument&)>& edit) {
    std::shared_ptr<Entry> entry;
    try {
        entry = find(id);
    } catch (const Error& e) {
        return error_response(500, e.what());
    }
    if (!entry) return error_response(404, "unknown run " + id);

    std::lock_guard lock(entry->write);
    RunDocument next = *entry->snapshot();
    try {
        edit(next);
        ++revision(next);
        write_file(state_dir_ / (id + ".json"), serialize_run(next));
    } catch (const Rejection& r) {
        return error_response(r.status, r.message);
    } catch (const Error& e) {
        return error_response(status_for(e), e.what());
    }
    auto published = std::make_shared<const RunDocument>(std::move(next));
    entry->publish(published);
    return {200, to_json(*published)};
}

ServiceResponse Service::set_leaf_score(const std::string& id, const std::string& leaf_id, const Json& body) {
    auto it = body.is_object() ? body.find("score") : body.end();
    if (!body.is_object() || it == body.end()) return error_response(400, "body must be {\"score\": number | null}");
    std::optional<Probability> score;
    if (!it->is_null()) {
        if (!it->is_number()) return error_response(400, "score must be a number or null");
        score = it->get<double>();
        if (!(*score >= 0.0 && *score <= 1.0)) return error_response(400, "score must lie in [0, 1]");
    }
    return mutate(id, [&](RunDocument& doc) {
        auto [tree, node] = locate(doc, leaf_id);
        if (!node->is_leaf()) throw Rejection{400, "node " + leaf_id + " is not a leaf"};
        node->override_score = score;
    });
}

ServiceResponse Service::set_pruned(const std::string& id, const std::string& node_id, const Json& body) {
    auto it = body.is_object() ? body.find("pruned") : body.end();
    if (!body.is_object() || it == body.end() || !it->is_boolean())
        return error_response(400, "body must be {\"pruned\": boolean}");
    const bool pruned = it->get<bool>();
    return mutate(id, [&](RunDocument& doc) {
        auto [tree, node] = locate(doc, node_id);
        if (node == tree) throw Rejection{400, "the root of a tree cannot be pruned"};
        node->pruned = pruned;
        if (leaves(*tree).empty()) throw Rejection{400, "pruning " + node_id + " would leave tree " + tree->id + " without leaves"};
    });
}

ServiceResponse Service::repropagate(const std::string& id) {
    return mutate(id, [](RunDocument& doc) {
        try {
            if (auto* mcq = std::get_if<McqRun>(&doc)) {
                recompute_scores(*mcq);
            } else {
                auto& run = std::get<TreeRun>(doc);
                run.root_prob = bonsai::repropagate(run.tree);
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::precondition) throw Rejection{409, std::string(e.what()) + " (rescore first)"};
            throw;
        }
    });
}

ServiceResponse Service::rescore(const std::string& id) {
    return mutate(id, [&](RunDocument& doc) {
        const RunConfig& config = std::visit([](const auto& r) -> const RunConfig& { return r.config; }, doc);
        const Backends backends = backends_(config);
        const auto templates = config.prompt_dir ? prompts::Templates::load(*config.prompt_dir) : templates_;
        if (auto* mcq = std::get_if<McqRun>(&doc)) {
            const EvidenceBank bank = mcq->bank();
            score_options(*mcq, bank, backends, templates);
            if (!mcq->rounds.empty()) mcq->rounds.back().option_scores = mcq->option_scores;
        } else {
            auto& run = std::get<TreeRun>(doc);
            const std::string no_counterfactual;
            const InferenceContext ctx{run.bank, run.summary, no_counterfactual, run.config, backends, templates};
            run.root_prob = infer(run.tree, ctx);
        }
    });
}

ServiceResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
    std::vector<std::string> parts;
    for (std::size_t pos = 0; pos <= path.size();) {
        const auto next = std::min(path.find('/', pos), path.size());
        if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
        pos = next + 1;
    }

    if (parts.empty() || parts[0] != "runs") return error_response(404, "no route for " + std::string(path));
    const bool get = method == "GET", post = method == "POST";

    if (parts.size() == 1) return get ? list_runs() : error_response(405, "method not allowed");
    if (parts.size() == 2) return get ? get_run(parts[1]) : error_response(405, "method not allowed");
    if (!post) return error_response(405, "method not allowed");

    Json payload = Json::object();
    if (!text::trim(body).empty()) {
        payload = Json::parse(body, nullptr, false);
        if (payload.is_discarded()) return error_response(400, "request body is not valid JSON");
    }
    if (parts.size() == 3 && parts[2] == "repropagate") return repropagate(parts[1]);
    if (parts.size() == 3 && parts[2] == "rescore") return rescore(parts[1]);
    if (parts.size() == 5 && parts[2] == "leaves" && parts[4] == "score") return set_leaf_score(parts[1], parts[3], payload);
    if (parts.size() == 5 && parts[2] == "nodes" && parts[4] == "prune") return set_pruned(parts[1], parts[3], payload);
    return error_response(404, "no route for " + std::string(path));
}

BackendFactory config_backend_factory(std::optional<std::filesystem::path> script_override) {
    return [script_override](const RunConfig& config) {
        return BackendRegistry::from_config(config, script_override).resolve(config);
    };
}

void run_http_server(Service& service, const std::string& host, int port,
                     const std::optional<std::filesystem::path>& ui_dir) {
    httplib::Server server;
    if (ui_dir && !server.set_mount_point("/ui", ui_dir->string()))
        throw Error(ErrorKind::io, "ui directory " + ui_dir->string() + " does not exist");

    auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
        ServiceResponse r;
        try {
            r = service.handle(req.method, req.path, req.body);
        } catch (const std::exception& e) {
            r = error_response(500, e.what());
        }
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(r.body.dump(2), "application/json");
    };
    server.Get(R"(/runs(/.*)?)", dispatch);
    server.Post(R"(/runs/.*)", dispatch);
    server.Options(R"(/runs(/.*)?)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    std::cerr << "bonsai: serving " << service.state_dir().string() << " on http://" << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw Error(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace bonsai
