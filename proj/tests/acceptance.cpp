// Acceptance checks: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "bonsai/cli.hpp"
#include "bonsai/counterfactual.hpp"
#include "bonsai/error.hpp"
#include "bonsai/evidence.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/retriever.hpp"
#include "bonsai/run_document.hpp"
#include "bonsai/scorer.hpp"
#include "bonsai/serialize.hpp"
#include "bonsai/serve.hpp"
#include "bonsai/tree.hpp"
#include "support.hpp"

using namespace bonsai;
namespace fs = std::filesystem;

namespace {

/// Collects the first failure of a criterion.
struct Check {
    std::string failure;
    void expect(bool ok, const std::string& what) {
        if (!ok && failure.empty()) failure = what;
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<void(Check&)>& body) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(check);
    } catch (const std::exception& e) {
        check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(secs < budget_seconds, "took " + std::to_string(secs) + "s, budget " + std::to_string(budget_seconds) + "s");
    if (!check.failure.empty()) ++failures;
    std::printf("%s %s (%.3fs)%s%s\n", check.failure.empty() ? "PASS" : "FAIL", name.c_str(), secs,
                check.failure.empty() ? "" : ": ", check.failure.c_str());
}

fs::path temp_dir(const std::string& tag) {
    std::random_device rd;
    auto p = fs::temp_directory_path() / ("bonsai-acceptance-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(p);
    return p;
}

/// Frame counts by hand, in integer arithmetic, for integer clip lengths.
int hand_frame_count(int x) {
    if (x <= 3) return 1;
    if (x <= 20) return 1 + ((x - 3) * 5 + 16) / 17;  // ceil(1 + (x-3) * 5/17)
    if (x <= 40) return 6 + ((x - 20) + 4) / 5;        // ceil(6 + (x-20) * 4/20)
    return 10;
}

class TableRelevance final : public RelevanceBackend {
public:
    explicit TableRelevance(std::vector<double> scores) : scores_(std::move(scores)) {}
    std::vector<double> relevance(std::string_view, std::span<const std::string> candidates) const override {
        return {scores_.begin(), scores_.begin() + static_cast<std::ptrdiff_t>(candidates.size())};
    }

private:
    std::vector<double> scores_;
};

class TableEntailment final : public EntailmentBackend {
public:
    std::map<std::pair<std::string, std::string>, double> table;
    double entailment(std::string_view premise, std::string_view hypothesis) const override {
        return table.at({std::string(premise), std::string(hypothesis)});
    }
};

}  // namespace

int main() {
    criterion("frame sampling schedule matches the hand table on [0,60]", 1.0, [](Check& c) {
        for (int x = 0; x <= 60; ++x)
            c.expect(frame_count(x) == hand_frame_count(x), "x=" + std::to_string(x));
        c.expect(frame_count(2) == 1 && frame_count(10) == 4 && frame_count(30) == 8 && frame_count(100) == 10,
                 "documented values");
        c.expect(frame_count(3) == 1 && frame_count(20) == 6 && frame_count(40) == 10, "breakpoints");
        c.expect(frame_count(3.001) == 2 && frame_count(20.001) == 7 && frame_count(40.001) == 10, "just past breakpoints");
    });

    criterion("tree inference equals the brute-force chain-rule product on 200 random trees", 10.0, [](Check& c) {
        std::mt19937_64 rng(1);
        EvidenceBank bank;
        bank.sources.push_back({"s", SourceModality::text, "s.txt", 2});
        bank.factors.push_back({"s#0.0", "A street is wet.", {"s", SpanModality::text, 0, 1, std::nullopt}, std::nullopt});
        const std::string summary = "A street.", counterfactual;
        RunConfig config;
        config.decomposition_max = 4;
        Backends b;
        b.chat = b.vision = b.scorer = testing::scripted_scorer();
        b.relevance = std::make_shared<LexicalRelevance>();
        const InferenceContext ctx{bank, summary, counterfactual, config, b};
        auto prob = [](const std::string& claim, const std::vector<std::string>& conds) {
            return testing::scripted_rubric(claim, conds) / 10.0;
        };
        for (int i = 0; i < 200; ++i) {
            const auto tree = testing::random_tree(rng, 4, 3, 0.1);
            auto par = tree, ref = tree;
            const double p = infer(par, ctx, {}, Exec::parallel);
            const double r = infer_reference(ref, ctx);
            c.expect(std::abs(p - testing::oracle_product(tree, prob)) <= 1e-12, "tree " + std::to_string(i));
            c.expect(p == r && par == ref, "parallel != reference on tree " + std::to_string(i));
            // Each leaf is conditioned on the later siblings along its path, never earlier ones.
            for (const auto& [leaf, conds] : plan_leaves(par, ConditioningOrder::right))
                for (const auto& cond : conds) c.expect(cond.node_id > leaf->id.substr(0, cond.node_id.size()), "order");
        }
    });

    criterion("scoring responses parse back to both worked exemplars exactly", 1.0, [](Check& c) {
        const auto& ex = prompts::Templates::defaults().scoring_exemplars;
        const auto first = ex.find("PROBABILITY SCORES:\n") + 20;
        const auto second_intro = ex.find("Here is a", first);
        const auto second = ex.find("PROBABILITY SCORES:\n", second_intro) + 20;
        const auto tornado = parse_score_trace(ex.substr(first, second_intro - first), 3);
        c.expect(tornado.anchor_score == 0.1, "tornado anchor");
        c.expect(tornado.steps.size() == 3 && tornado.steps[0].score == 0.2 && tornado.steps[1].score == 0.2 &&
                     tornado.steps[2].score == 0.6,
                 "tornado steps");
        c.expect(tornado.final == 0.6, "tornado final");
        const auto blur = parse_score_trace(ex.substr(second), 4);
        c.expect(blur.final == 1.0, "blur final");
    });

    criterion("top-k retrieval equals an exhaustive sort on 100 random banks", 10.0, [](Check& c) {
        std::mt19937_64 rng(2);
        for (int round = 0; round < 100; ++round) {
            const std::size_t n = 1 + rng() % 1000;
            EvidenceBank bank;
            std::vector<double> scores;
            for (std::size_t i = 0; i < n; ++i) {
                scores.push_back(static_cast<double>(rng() % 10) / 9.0);
                bank.factors.push_back({"f" + std::to_string(rng() % 100000), "t" + std::to_string(i),
                                        {"s" + std::to_string(rng() % 4), SpanModality::text,
                                         static_cast<double>(rng() % 50), 60, std::nullopt},
                                        std::nullopt});
            }
            TableRelevance rel(scores);
            const int k = 1 + static_cast<int>(rng() % 12);
            auto oracle = bank.factors;
            for (std::size_t i = 0; i < n; ++i) oracle[i].relevance = scores[i];
            std::sort(oracle.begin(), oracle.end(), ranks_before);
            oracle.resize(std::min<std::size_t>(n, static_cast<std::size_t>(k)));
            c.expect(retrieve_top_k({"claim", true}, bank, k, rel) == oracle, "bank " + std::to_string(round));
        }
    });

    criterion("multiple-choice runs are deterministic; rescaling adds one round below theta", 5.0, [](Check& c) {
        const auto dir = temp_dir("mcq");
        std::string first;
        for (int i = 0; i < 3; ++i) {
            const auto out = (dir / ("run" + std::to_string(i) + ".json")).string();
            std::ostringstream so, se;
            const int code = cli::run({"mcq", "--input", testing::fixture("mcq/question.json").string(), "--config",
                                       testing::fixture("mcq/config.json").string(), "--out", out},
                                      so, se);
            c.expect(code == 0, "mcq exit code: " + se.str());
            c.expect(so.str() == "1\n", "expected option 1, printed " + so.str());
            const auto doc = read_file(out);
            if (i == 0) first = doc;
            c.expect(doc == first, "run " + std::to_string(i) + " differs");
        }
        // Hand computation: option 1 scores 0.9, option 2 scores 0.0.
        const auto run = std::get<McqRun>(deserialize_run(first));
        c.expect(std::abs(run.option_scores[0] - 0.9) < 1e-12 && run.option_scores[1] == 0.0, "option scores");

        std::ostringstream so, se;
        const auto out = (dir / "rescale.json").string();
        c.expect(cli::run({"mcq", "--input", testing::fixture("rescale/question.json").string(), "--config",
                           testing::fixture("rescale/config.json").string(), "--out", out},
                          so, se) == 0,
                 "rescale exit code: " + se.str());
        const auto rescaled = std::get<McqRun>(deserialize_run(read_file(out)));
        c.expect(rescaled.rounds.size() == 2, "expected 2 rounds, got " + std::to_string(rescaled.rounds.size()));
        c.expect(rescaled.config.rescale_rounds > 1, "fixture must allow more than one round");
        fs::remove_all(dir);
    });

    criterion("shared-leaf pruning never empties an option and follows the entailment rule", 10.0, [](Check& c) {
        std::mt19937_64 rng(3);
        for (int round = 0; round < 300; ++round) {
            const std::size_t n = 2 + rng() % 4;
            std::vector<TreeNode> trees;
            std::vector<Claim> hs;
            for (std::size_t o = 0; o < n; ++o) {
                hs.push_back({"H" + std::to_string(o), false});
                trees.push_back(testing::random_tree(rng, 2, 3, 0.0, std::to_string(o)));
            }
            TableEntailment ent;
            for (std::size_t o = 0; o < n; ++o)
                for (const auto* l : leaves(trees[o]))
                    for (std::size_t h = 0; h < n; ++h)
                        if (h != o) ent.table[{hs[h].text, l->claim.text}] = static_cast<double>(rng() % 11) / 10.0;
            const double tau = static_cast<double>(rng() % 11) / 10.0;
            const auto before = trees;
            prune_shared_leaves(trees, hs, tau, ent);
            for (std::size_t o = 0; o < n; ++o) {
                c.expect(!leaves(trees[o]).empty(), "option emptied");
                const auto ls = leaves(before[o]);
                std::vector<double> mins;
                for (const auto* l : ls) {
                    double m = 2.0;
                    for (std::size_t h = 0; h < n; ++h)
                        if (h != o) m = std::min(m, ent.table.at({hs[h].text, l->claim.text}));
                    mins.push_back(m);
                }
                const bool all = std::all_of(mins.begin(), mins.end(), [&](double m) { return m >= tau; });
                const auto keep = static_cast<std::size_t>(std::min_element(mins.begin(), mins.end()) - mins.begin());
                for (std::size_t k = 0; k < ls.size(); ++k) {
                    const bool expected = mins[k] >= tau && !(all && k == keep);
                    c.expect(find_node(trees[o], ls[k]->id)->pruned == expected, "decision on leaf " + ls[k]->id);
                }
            }
        }
    });

    criterion("a leaf override 0.8 -> 0.5 repropagates 0.64 -> 0.40 with no backend calls", 5.0, [](Check& c) {
        const auto dir = temp_dir("serve");
        fs::copy_file(testing::fixture("serve/two-leaf.json"), dir / "two-leaf.json");
        auto failing = std::make_shared<FailingBackend>();
        Service service(dir, [failing](const RunConfig&) { return Backends::all(failing); });
        const auto before = service.get_run("two-leaf").body;
        c.expect(std::abs(before["root_prob"].get<double>() - 0.64) < 1e-9, "fixture root is not 0.64");
        c.expect(before["tree"]["children"][1]["score_trace"]["final"].get<double>() == 0.8, "fixture leaf is not 0.8");
        c.expect(service.handle("POST", "/runs/two-leaf/leaves/0.1/score", R"({"score": 0.5})").status == 200, "override");
        const auto after = service.handle("POST", "/runs/two-leaf/repropagate", "");
        c.expect(after.status == 200, "repropagate status");
        c.expect(std::abs(after.body["root_prob"].get<double>() - 0.40) < 1e-9, "root is not 0.40");
        c.expect(failing->calls() == 0, "backend was called");
        fs::remove_all(dir);
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
