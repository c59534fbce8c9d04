#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "bonsai/backends.hpp"
#include "bonsai/prompts.hpp"
#include "bonsai/run_document.hpp"
#include "bonsai/serialize.hpp"

namespace bonsai {

struct ServiceResponse {
    int status = 200;
    Json body;
};

/// Resolves the backends a rescore uses for a stored run's configuration.
using BackendFactory = std::function<Backends(const RunConfig&)>;

/// Run store and correction API behind serve mode. Each run is a document
/// `<state_dir>/<id>.json`. Reads return immutable snapshots without waiting
/// on writers; mutations of one run are serialized, bump its revision, are
/// written to disk before they become visible, and return the new document.
class Service {
public:
    Service(std::filesystem::path state_dir, BackendFactory backends,
            prompts::Templates templates = prompts::Templates::defaults());

    /// GET /runs -> {"runs": [{id, kind, revision, title}]}
    ServiceResponse list_runs() const;
    /// GET /runs/{id}
    ServiceResponse get_run(const std::string& id) const;
    /// POST /runs/{id}/leaves/{leafId}/score {"score": s | null}. Sets (or
    /// clears) the human override; the model trace is kept.
    ServiceResponse set_leaf_score(const std::string& id, const std::string& leaf_id, const Json& body);
    /// POST /runs/{id}/nodes/{nodeId}/prune {"pruned": bool}
    ServiceResponse set_pruned(const std::string& id, const std::string& node_id, const Json& body);
    /// POST /runs/{id}/repropagate: recomputes from stored scores, no backend calls.
    ServiceResponse repropagate(const std::string& id);
    /// POST /runs/{id}/rescore: full re-inference through the backends.
    ServiceResponse rescore(const std::string& id);

    /// Routes a request the way the HTTP server does. `body` is the raw request body.
    ServiceResponse handle(std::string_view method, std::string_view path, std::string_view body);

    const std::filesystem::path& state_dir() const { return state_dir_; }

private:
    struct Entry {
        std::mutex write;  // serializes mutations of this run
        mutable std::mutex snapshot_guard;
        std::shared_ptr<const RunDocument> doc;

        std::shared_ptr<const RunDocument> snapshot() const;
        void publish(std::shared_ptr<const RunDocument> next);
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    ServiceResponse mutate(const std::string& id, const std::function<void(RunDocument&)>& edit);

    std::filesystem::path state_dir_;
    BackendFactory backends_;
    prompts::Templates templates_;
    mutable std::mutex index_guard_;
    mutable std::map<std::string, std::shared_ptr<Entry>> runs_;
};

/// Default factory: the registry described by the run's own configuration.
BackendFactory config_backend_factory(std::optional<std::filesystem::path> script_override = std::nullopt);

/// Serves `service` over HTTP on host:port until stopped. When `ui_dir` is
/// given its files are served under /ui/. Blocks.
void run_http_server(Service& service, const std::string& host, int port,
                     const std::optional<std::filesystem::path>& ui_dir = std::nullopt);

}  // namespace bonsai
