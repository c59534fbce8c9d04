#include "bonsai/run_document.hpp"

#include "bonsai/error.hpp"
#include "json_fields.hpp"

namespace bonsai {

using namespace detail;

namespace {

Json scores_json(const std::vector<Probability>& scores) {
    Json out = Json::array();
    for (double s : scores) out.push_back(s);
    return out;
}

std::vector<Probability> scores_from(const Json& j, const std::string& path, const char* key) {
    std::vector<Probability> out;
    const auto& arr = array_field(j, path, key, true);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) bad(path + "." + key + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(arr[i].get<double>());
    }
    return out;
}

int get_int_field(const Json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_number_integer()) bad(path + "." + key, "expected an integer");
    return v.get<int>();
}

void expect_kind(const Json& j, const std::string& path, const char* kind) {
    if (get_string(j, path, "kind") != kind) bad(path + ".kind", std::string("expected \"") + kind + "\"");
}

}  // namespace

Json to_json(const McqRun& run) {
    Json options = Json::array(), trees = Json::array(), rounds = Json::array();
    for (const auto& o : run.options) options.push_back(to_json(o));
    for (const auto& t : run.trees) trees.push_back(to_json(t));
    for (const auto& r : run.rounds)
        rounds.push_back({{"index", r.index},
                          {"context", r.context},
                          {"bank", bank_to_json(r.bank)},
                          {"option_scores", scores_json(r.option_scores)}});
    return Json{{"kind", "mcq"},
                {"revision", run.revision},
                {"question", run.question},
                {"answers", run.answers},
                {"options", options},
                {"trees", trees},
                {"option_scores", scores_json(run.option_scores)},
                {"chosen", run.chosen},
                {"config", to_json(run.config)},
                {"rounds", rounds},
                {"summary", run.summary},
                {"counterfactual_context", run.counterfactual_context},
                {"judge_rationale", run.judge_rationale ? Json(*run.judge_rationale) : Json(nullptr)},
                {"warnings", run.warnings}};
}

Json to_json(const TreeRun& run) {
    return Json{{"kind", "tree"},
                {"revision", run.revision},
                {"hypothesis", run.hypothesis},
                {"tree", to_json(run.tree)},
                {"root_prob", run.root_prob},
                {"config", to_json(run.config)},
                {"bank", bank_to_json(run.bank)},
                {"summary", run.summary},
                {"warnings", run.warnings}};
}

Json to_json(const RunDocument& doc) {
    return std::visit([](const auto& run) { return to_json(run); }, doc);
}

McqRun mcq_run_from_json(const Json& j, const std::string& path) {
    expect_kind(j, path, "mcq");
    McqRun run;
    run.revision = get_int_field(j, path, "revision");
    run.question = get_string(j, path, "question");
    run.answers = string_list(j, path, "answers");
    const auto& options = array_field(j, path, "options", true);
    for (std::size_t i = 0; i < options.size(); ++i)
        run.options.push_back(claim_from_json(options[i], path + ".options[" + std::to_string(i) + "]"));
    const auto& trees = array_field(j, path, "trees", true);
    for (std::size_t i = 0; i < trees.size(); ++i)
        run.trees.push_back(tree_from_json(trees[i], path + ".trees[" + std::to_string(i) + "]"));
    run.option_scores = scores_from(j, path, "option_scores");
    run.chosen = static_cast<std::size_t>(get_int_field(j, path, "chosen"));
    run.config = config_from_json(field(j, path, "config"), path + ".config");
    const auto& rounds = array_field(j, path, "rounds", false);
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        const std::string p = path + ".rounds[" + std::to_string(i) + "]";
        EvidenceRound r;
        r.index = get_int_field(rounds[i], p, "index");
        r.context = get_string(rounds[i], p, "context");
        r.bank = bank_from_json(field(rounds[i], p, "bank"), p + ".bank");
        r.option_scores = scores_from(rounds[i], p, "option_scores");
        run.rounds.push_back(std::move(r));
    }
    run.summary = get_string(j, path, "summary");
    run.counterfactual_context = get_string(j, path, "counterfactual_context");
    run.judge_rationale = opt_string(j, path, "judge_rationale");
    run.warnings = string_list(j, path, "warnings");

    if (run.options.size() < 2) bad(path + ".options", "an mcq run needs at least two options");
    if (run.trees.size() != run.options.size()) bad(path + ".trees", "trees must align with options");
    if (run.option_scores.size() != run.options.size())
        bad(path + ".option_scores", "option_scores must align with options");
    if (run.chosen >= run.options.size()) bad(path + ".chosen", "index out of range");
    return run;
}

TreeRun tree_run_from_json(const Json& j, const std::string& path) {
    expect_kind(j, path, "tree");
    TreeRun run;
    run.revision = get_int_field(j, path, "revision");
    run.hypothesis = get_string(j, path, "hypothesis");
    run.tree = tree_from_json(field(j, path, "tree"), path + ".tree");
    run.root_prob = get_number(j, path, "root_prob");
    run.config = config_from_json(field(j, path, "config"), path + ".config");
    run.bank = bank_from_json(field(j, path, "bank"), path + ".bank");
    run.summary = get_string(j, path, "summary");
    run.warnings = string_list(j, path, "warnings");
    return run;
}

RunDocument run_from_json(const Json& j, const std::string& path) {
    const auto kind = get_string(j, path, "kind");
    if (kind == "mcq") return mcq_run_from_json(j, path);
    if (kind == "tree") return tree_run_from_json(j, path);
    bad(path + ".kind", "unknown run kind '" + kind + "'");
}

std::string serialize_run(const RunDocument& doc) { return to_json(doc).dump(2) + "\n"; }

RunDocument deserialize_run(std::string_view document) { return run_from_json(parse_json(document, "run")); }

int& revision(RunDocument& doc) {
    return std::visit([](auto& run) -> int& { return run.revision; }, doc);
}

}  // namespace bonsai
