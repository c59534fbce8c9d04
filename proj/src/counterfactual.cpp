#include "bonsai/counterfactual.hpp"

#include <algorithm>
#include <limits>

#include "bonsai/decomposer.hpp"
#include "bonsai/error.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/scorer.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/text.hpp"
#include "bonsai/tree.hpp"

namespace bonsai {

const EvidenceBank& McqRun::bank() const {
    static const EvidenceBank empty;
    return rounds.empty() ? empty : rounds.back().bank;
}

McqInput mcq_input_from_json(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorKind::parse, "mcq: expected an object");
    McqInput in;
    auto q = j.find("question");
    if (q == j.end() || !q->is_string()) throw Error(ErrorKind::parse, "mcq.question: missing field");
    in.question = q->get<std::string>();
    auto opts = j.find("options");
    if (opts == j.end() || !opts->is_array()) throw Error(ErrorKind::parse, "mcq.options: expected an array");
    for (std::size_t i = 0; i < opts->size(); ++i) {
        if (!(*opts)[i].is_string())
            throw Error(ErrorKind::parse, "mcq.options[" + std::to_string(i) + "]: expected a string");
        in.answers.push_back((*opts)[i].get<std::string>());
    }
    if (auto it = j.find("options_are_hypotheses"); it != j.end()) {
        if (!it->is_boolean()) throw Error(ErrorKind::parse, "mcq.options_are_hypotheses: expected a boolean");
        in.options_are_hypotheses = it->get<bool>();
    }
    if (auto it = j.find("sources"); it != j.end()) {
        in.sources = manifest_from_json(Json{{"sources", *it}}, base_dir);
    }
    if (auto it = j.find("manifest"); it != j.end()) {
        if (in.sources) throw Error(ErrorKind::parse, "mcq: give either sources or manifest, not both");
        if (!it->is_string()) throw Error(ErrorKind::parse, "mcq.manifest: expected a path");
        std::filesystem::path p(it->get<std::string>());
        in.sources = load_manifest(p.is_relative() ? base_dir / p : p);
    }
    if (auto it = j.find("bank"); it != j.end()) {
        if (!it->is_string()) throw Error(ErrorKind::parse, "mcq.bank: expected a path");
        std::filesystem::path p(it->get<std::string>());
        in.bank = deserialize_bank(read_file(p.is_relative() ? base_dir / p : p));
    }
    return in;
}

McqInput load_mcq_input(const std::filesystem::path& path) {
    return mcq_input_from_json(parse_json(read_file(path), path.string()),
                               std::filesystem::absolute(path).parent_path());
}

Claim qa_to_hypothesis(std::string_view question, std::string_view answer, const ChatBackend& chat,
                       const prompts::Templates& templates, int max_tokens) {
    require(!text::trim(answer).empty(), "qa_to_hypothesis: answer is empty");
    ChatRequest req;
    req.prompt = prompts::render(templates.hypothesis,
                                 {{"question", text::trim(question)}, {"answer", text::trim(answer)}});
    req.max_tokens = max_tokens;
    const auto lines = text::split_lines(chat.complete(req));
    std::string statement;
    for (const auto& line : lines) {
        statement = text::trim(line);
        if (!statement.empty()) break;
    }
    if (statement.rfind("STATEMENT:", 0) == 0) statement = text::trim(statement.substr(10));
    statement = text::strip_quotes(statement);
    if (statement.empty()) throw Error(ErrorKind::parse, "hypothesis response is empty");
    return Claim{statement, false};
}

std::string counterfactual_context(std::span<const Claim> hypotheses) {
    std::string listed;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        if (i) listed += " ";
        listed += "(" + std::to_string(i + 1) + ") " + hypotheses[i].text;
    }
    if (!listed.ends_with('.')) listed += ".";
    return "Exactly one of the following statements is true: " + listed +
           " Score the hypothesis relative to these alternatives.";
}

std::size_t prune_shared_leaves(std::span<TreeNode> trees, std::span<const Claim> hypotheses, double tau,
                                const EntailmentBackend& entailment, Exec exec) {
    require(trees.size() == hypotheses.size(), "prune_shared_leaves: trees and hypotheses must align");
    require(trees.size() >= 2, "prune_shared_leaves: at least two options are required");

    struct Check {
        std::size_t option;
        TreeNode* leaf;
        double min_entailment = std::numeric_limits<double>::infinity();
    };
    std::vector<Check> checks;
    for (std::size_t o = 0; o < trees.size(); ++o)
        for (auto* leaf : leaves(trees[o])) checks.push_back({o, leaf});

    for_each_index(checks.size(), exec, [&](std::size_t i) {
        auto& c = checks[i];
        for (std::size_t h = 0; h < hypotheses.size(); ++h) {
            if (h == c.option) continue;
            c.min_entailment = std::min(c.min_entailment, entailment.entailment(hypotheses[h].text, c.leaf->claim.text));
        }
    });

    std::size_t pruned = 0;
    for (std::size_t o = 0; o < trees.size(); ++o) {
        std::vector<Check*> mine;
        for (auto& c : checks)
            if (c.option == o) mine.push_back(&c);
        const bool all_shared =
            std::all_of(mine.begin(), mine.end(), [&](const Check* c) { return c->min_entailment >= tau; });
        const Check* survivor = nullptr;
        if (all_shared && !mine.empty())
            survivor = *std::min_element(mine.begin(), mine.end(), [](const Check* a, const Check* b) {
                return a->min_entailment < b->min_entailment;
            });
        for (auto* c : mine) {
            if (c->min_entailment >= tau && c != survivor) {
                c->leaf->pruned = true;
                ++pruned;
            }
        }
    }
    return pruned;
}

std::string leaf_context(std::span<const TreeNode> trees) {
    std::vector<std::string> claims;
    for (const auto& t : trees)
        for (const auto* l : leaves(t)) claims.push_back(l->claim.text);
    return text::join(claims, " ");
}

std::size_t argmax(std::span<const Probability> scores) {
    require(!scores.empty(), "argmax: no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

namespace {

std::vector<JudgeOption> judge_options(const McqRun& run) {
    std::vector<JudgeOption> out;
    for (std::size_t i = 0; i < run.trees.size(); ++i) out.push_back(judge_option(run.options[i].text, run.trees[i]));
    return out;
}

Error in_option(const Error& e, std::string_view stage, std::size_t option) {
    return e.with_context(std::string(stage) + " (option " + std::to_string(option + 1) + ")");
}

}  // namespace

void score_options(McqRun& run, const EvidenceBank& bank, const Backends& backends,
                   const prompts::Templates& templates, Exec exec) {
    const InferenceContext ctx{bank, run.summary, run.counterfactual_context, run.config, backends, templates};
    run.option_scores.assign(run.trees.size(), 0.0);
    for (std::size_t i = 0; i < run.trees.size(); ++i) {
        try {
            infer(run.trees[i], ctx, {}, exec);
            run.option_scores[i] = aggregate(run.trees[i], run.config.aggregation);
        } catch (const Error& e) {
            throw in_option(e, "scoring", i);
        }
    }
    if (run.config.aggregation == Aggregation::judge) {
        require(backends.chat != nullptr, "no chat backend for the judge");
        try {
            const auto verdict = judge(run.question, judge_options(run), *backends.chat, templates, run.config.max_tokens);
            run.chosen = verdict.index;
            run.judge_rationale = verdict.rationale;
        } catch (const Error& e) {
            throw e.with_context("judge");
        }
    } else {
        run.chosen = argmax(run.option_scores);
        run.judge_rationale.reset();
    }
}

void recompute_scores(McqRun& run) {
    run.option_scores.assign(run.trees.size(), 0.0);
    for (std::size_t i = 0; i < run.trees.size(); ++i) {
        try {
            repropagate(run.trees[i]);
            run.option_scores[i] = aggregate(run.trees[i], run.config.aggregation);
        } catch (const Error& e) {
            throw in_option(e, "repropagate", i);
        }
    }
    if (run.config.aggregation != Aggregation::judge) run.chosen = argmax(run.option_scores);
}

McqRun answer_mcq(const McqInput& input, const RunConfig& config, const Backends& backends,
                  const prompts::Templates& templates, Exec exec) {
    require(input.answers.size() >= 2, "answer_mcq: at least two options are required, got " +
                                           std::to_string(input.answers.size()));
    require(backends.chat != nullptr, "answer_mcq: no chat backend");
    McqRun run;
    run.question = input.question;
    run.answers = input.answers;
    run.config = config;
    const std::size_t n = input.answers.size();

    run.options.resize(n);
    for_each_index(n, exec, [&](std::size_t i) {
        if (input.options_are_hypotheses) {
            require(!text::trim(input.answers[i]).empty(), "option " + std::to_string(i + 1) + " is empty");
            run.options[i] = Claim{text::trim(input.answers[i]), false};
            return;
        }
        try {
            run.options[i] = qa_to_hypothesis(input.question, input.answers[i], *backends.chat, templates,
                                              config.max_tokens);
        } catch (const Error& e) {
            throw in_option(e, "hypothesis", i);
        }
    });

    // Options are built one after another; each build parallelises per level.
    run.trees.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            run.trees[i] = build_tree(run.options[i], config, backends, templates, exec, std::to_string(i));
        } catch (const Error& e) {
            throw in_option(e, "decomposition", i);
        }
    }

    require(backends.entailment != nullptr, "answer_mcq: no entailment backend");
    try {
        prune_shared_leaves(run.trees, run.options, config.tau, *backends.entailment, exec);
    } catch (const Error& e) {
        throw e.with_context("pruning");
    }

    EvidenceRound round;
    if (input.bank) {
        round.bank = *input.bank;
    } else if (input.sources) {
        const bool leaf_level = config.evidence_level == EvidenceLevel::leaf;
        round.context = leaf_level ? leaf_context(run.trees) : input.question;
        try {
            auto built = build_bank(*input.sources, round.context,
                                    leaf_level ? ExtractionStage::test_time : ExtractionStage::offline, config,
                                    backends, templates, exec);
            round.bank = std::move(built.bank);
            run.warnings.insert(run.warnings.end(), built.warnings.begin(), built.warnings.end());
        } catch (const Error& e) {
            throw e.with_context("evidence extraction");
        }
    }

    if (config.summary_mode == SummaryMode::question || round.bank.empty()) {
        run.summary = question_context(input.question);
    } else {
        std::vector<std::string> observations;
        for (const auto& f : round.bank.factors) observations.push_back(f.text);
        try {
            run.summary = make_anchor_summary(observations, std::nullopt, *backends.chat, templates, config.max_tokens);
        } catch (const Error& e) {
            throw e.with_context("summary");
        }
    }
    run.counterfactual_context = counterfactual_context(run.options);

    score_options(run, round.bank, backends, templates, exec);
    round.option_scores = run.option_scores;
    run.rounds.push_back(std::move(round));
    return run;
}

int rescale_evidence(McqRun& run, const SourceManifest& sources, const Backends& backends,
                     const prompts::Templates& templates, Exec exec) {
    require(!run.option_scores.empty(), "rescale_evidence: run has not been scored");
    int added = 0;
    while (added < run.config.rescale_rounds &&
           *std::max_element(run.option_scores.begin(), run.option_scores.end()) < run.config.theta) {
        EvidenceRound round;
        round.index = static_cast<int>(run.rounds.size());
        round.context = leaf_context(run.trees);
        try {
            auto built = build_bank(sources, round.context, ExtractionStage::test_time, run.config, backends, templates,
                                    exec, "r" + std::to_string(round.index) + ":");
            round.bank = std::move(built.bank);
            run.warnings.insert(run.warnings.end(), built.warnings.begin(), built.warnings.end());
        } catch (const Error& e) {
            throw e.with_context("evidence rescaling round " + std::to_string(round.index));
        }
        score_options(run, round.bank, backends, templates, exec);
        round.option_scores = run.option_scores;
        run.rounds.push_back(std::move(round));
        ++added;
    }
    return added;
}

}  // namespace bonsai
