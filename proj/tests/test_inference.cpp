#include "doctest.h"

#include <random>

#include "bonsai/counterfactual.hpp"
#include "bonsai/error.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/tree.hpp"
#include "support.hpp"

using namespace bonsai;

namespace {

TreeNode node(std::string id, std::string text, std::vector<TreeNode> children = {}) {
    TreeNode n;
    n.id = std::move(id);
    n.claim = {std::move(text), children.empty()};
    n.children = std::move(children);
    return n;
}

TreeNode scored_leaf(std::string id, double score) {
    auto n = node(std::move(id), "leaf");
    ScoreTrace t;
    t.anchor_explanation = "a";
    t.anchor_score = score;
    t.final = score;
    n.score_trace = t;
    return n;
}

/// Everything an InferenceContext refers to, kept alive together.
struct Harness {
    EvidenceBank bank;
    std::string summary = "A street scene.";
    std::string counterfactual;
    RunConfig config;
    Backends backends;

    explicit Harness(std::shared_ptr<const ChatBackend> scorer) {
        bank.sources.push_back({"s", SourceModality::text, "s.txt", 10});
        bank.factors.push_back({"s#0.0", "A street is wet.", {"s", SpanModality::text, 0, 1, std::nullopt}, std::nullopt});
        bank.factors.push_back({"s#1.0", "A dog barks.", {"s", SpanModality::text, 1, 2, std::nullopt}, std::nullopt});
        backends.chat = backends.vision = backends.scorer = std::move(scorer);
        backends.relevance = std::make_shared<LexicalRelevance>();
        backends.entailment = std::make_shared<FailingBackend>();
    }
    InferenceContext ctx() const { return {bank, summary, counterfactual, config, backends}; }
};

double scripted_probability(const std::string& claim, const std::vector<std::string>& conds) {
    return testing::scripted_rubric(claim, conds) / 10.0;
}

}  // namespace

TEST_SUITE("inference") {
    TEST_CASE("single atomic hypothesis scored 7 -> 0.7") {
        Harness h(testing::scripted_scorer({{testing::conditional_key("It rained.", {}), 7}}));
        auto t = node("0", "It rained.");
        CHECK(infer(t, h.ctx()) == doctest::Approx(0.7));
        CHECK(t.propagated_prob == doctest::Approx(0.7));
        REQUIRE(t.score_trace);
        CHECK(t.evidence.size() == 2);
        CHECK(t.conditioned_on.empty());
    }

    TEST_CASE("two leaves: P(A|B) = 0.9, P(B) = 0.8 -> 0.72") {
        Harness h(testing::scripted_scorer({{testing::conditional_key("A.", {"B."}), 9},
                                            {testing::conditional_key("B.", {}), 8}}));
        auto t = node("0", "A and B.", {node("0.0", "A."), node("0.1", "B.")});
        CHECK(infer(t, h.ctx()) == doctest::Approx(0.72));
        CHECK(t.children[0].conditioned_on == std::vector<std::string>{"0.1"});
        CHECK(t.children[0].score_trace->steps.back().factor_id == "cond:0.1");
        CHECK(t.children[1].conditioned_on.empty());
        CHECK(validate_tree(t, h.config).empty());
    }

    TEST_CASE("depth two: 0.5 * 0.8 * 0.5 -> 0.2, conditions inherited from the parent's later siblings") {
        Harness h(testing::scripted_scorer({{testing::conditional_key("A1.", {"A2.", "B."}), 5},
                                            {testing::conditional_key("A2.", {"B."}), 8},
                                            {testing::conditional_key("B.", {}), 5}}));
        auto t = node("0", "root", {node("0.0", "A.", {node("0.0.0", "A1."), node("0.0.1", "A2.")}), node("0.1", "B.")});
        t.children[0].claim.atomic = false;
        CHECK(infer(t, h.ctx()) == doctest::Approx(0.2));
        CHECK(t.children[0].propagated_prob == doctest::Approx(0.4));
        CHECK(t.children[0].children[0].conditioned_on == std::vector<std::string>{"0.1", "0.0.1"});
    }

    TEST_CASE("pruned children are neither scored nor used as conditions") {
        Harness h(testing::scripted_scorer({{testing::conditional_key("A.", {}), 6}}));
        auto t = node("0", "A and B.", {node("0.0", "A."), node("0.1", "B.")});
        t.children[1].pruned = true;
        CHECK(infer(t, h.ctx()) == doctest::Approx(0.6));
        CHECK_FALSE(t.children[1].score_trace.has_value());
        CHECK(t.children[0].conditioned_on.empty());
    }

    TEST_CASE("left conditioning order uses earlier siblings") {
        Harness h(testing::scripted_scorer());
        h.config.conditioning = ConditioningOrder::left;
        auto t = node("0", "r", {node("0.0", "A."), node("0.1", "B."), node("0.2", "C.")});
        infer(t, h.ctx());
        CHECK(t.children[0].conditioned_on.empty());
        CHECK(t.children[2].conditioned_on == std::vector<std::string>{"0.0", "0.1"});
    }

    TEST_CASE("an empty bank with no conditions cannot be scored") {
        Harness h(testing::scripted_scorer());
        h.bank.factors.clear();
        auto t = node("0", "Lonely claim.");
        CHECK_THROWS_AS(infer(t, h.ctx()), Error);
        // With a sibling condition, the leaf still has something to present.
        auto pair = node("0", "r", {node("0.0", "A."), node("0.1", "B.")});
        h.bank.sources.clear();
        CHECK_THROWS_AS(infer(pair, h.ctx()), Error);  // the last sibling has nothing
    }

    TEST_CASE("scoring errors carry the node id") {
        Harness h(std::make_shared<CallbackChat>([](const ChatRequest&) { return std::string("no scores here"); }));
        auto t = node("0", "r", {node("0.0", "A."), node("0.1", "B.")});
        try {
            infer(t, h.ctx(), {}, Exec::serial);
            FAIL("expected a parse error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::parse);
            CHECK(std::string(e.what()).find("node 0.") != std::string::npos);
        }
    }

    TEST_CASE("property: 200 random trees match the brute-force chain rule; serial = reference = parallel") {
        std::mt19937_64 rng(2024);
        Harness h(testing::scripted_scorer());
        for (int i = 0; i < 200; ++i) {
            const auto tree = testing::random_tree(rng, 4, 3, 0.2);
            auto par = tree, ser = tree, ref = tree;
            const double p = infer(par, h.ctx(), {}, Exec::parallel);
            const double s = infer(ser, h.ctx(), {}, Exec::serial);
            const double r = infer_reference(ref, h.ctx());
            CAPTURE(i);
            CHECK(std::abs(p - testing::oracle_product(tree, scripted_probability)) <= 1e-12);
            CHECK(p == s);
            CHECK(p == r);
            CHECK(par == ser);
            CHECK(par == ref);
            RunConfig config;
            config.decomposition_max = 4;
            CHECK(validate_tree(par, config).empty());
            // Repropagation from stored scores reproduces the same value without the backends.
            auto again = par;
            CHECK(repropagate(again) == p);
        }
    }

    TEST_CASE("repropagate honours overrides and refuses unscored leaves") {
        auto t = node("0", "r", {scored_leaf("0.0", 0.8), scored_leaf("0.1", 0.8)});
        CHECK(repropagate(t) == doctest::Approx(0.64));
        t.children[1].override_score = 0.5;
        CHECK(repropagate(t) == doctest::Approx(0.40));
        CHECK(t.children[1].score_trace->final == doctest::Approx(0.8));
        t.children[0].score_trace.reset();
        CHECK_THROWS_AS(repropagate(t), Error);
    }

    TEST_CASE("mean and geometric aggregation over non-pruned leaves") {
        auto t = node("0", "r", {scored_leaf("0.0", 0.5), scored_leaf("0.1", 0.7), scored_leaf("0.2", 0.8)});
        CHECK(aggregate_mean(t) == doctest::Approx(0.666667).epsilon(1e-6));
        auto two = node("0", "r", {scored_leaf("0.0", 0.2), scored_leaf("0.1", 0.6)});
        CHECK(aggregate_mean(two) == doctest::Approx(0.4));
        CHECK(aggregate(two, Aggregation::mean) == doctest::Approx(0.4));
        auto single = scored_leaf("0", 0.5);
        CHECK(aggregate_mean(single) == doctest::Approx(0.5));
        auto geo = node("0", "r", {scored_leaf("0.0", 0.2), scored_leaf("0.1", 0.8)});
        CHECK(aggregate_geometric_mean(geo) == doctest::Approx(0.4));
        two.children[0].pruned = true;
        CHECK(aggregate_mean(two) == doctest::Approx(0.6));
        repropagate(geo);
        CHECK(aggregate(geo, Aggregation::product) == doctest::Approx(0.16));
    }

    TEST_CASE("judge: prompt lists options with leaf scores; the answer is one-based") {
        const std::vector<JudgeOption> options{{"A tree fell.", {{"A tree is down.", 0.9}}},
                                               {"A parade passes.", {{"A band plays.", 0.1}}},
                                               {"Roadworks.", {}}};
        const auto p = judge_prompt("Why is the street closed?", options);
        CHECK(p.find("HYPOTHESIS (2): A parade passes.") != std::string::npos);
        CHECK(p.find("  - A tree is down. (score 0.90)") != std::string::npos);
        CHECK(p.find("QUESTION: Why is the street closed?") != std::string::npos);

        CHECK(parse_judge_response("2", 3) == 1);
        CHECK(parse_judge_response("Hypothesis 3 is likeliest.", 3) == 2);
        CHECK_THROWS_AS(parse_judge_response("7", 5), Error);
        CHECK_THROWS_AS(parse_judge_response("none of them", 5), Error);
        CHECK_THROWS_AS(parse_judge_response("0", 5), Error);

        auto chat = std::make_shared<CallbackChat>([](const ChatRequest&) { return std::string(" 2\n"); });
        const auto verdict = judge("Why?", options, *chat);
        CHECK(verdict.index == 1);
        CHECK(verdict.rationale == "2");
        const std::vector<JudgeOption> one{options[0]};
        CHECK_THROWS_AS(judge("Why?", one, *chat), Error);
    }

    TEST_CASE("judge_option collects the effective leaf scores") {
        auto t = node("0", "r", {scored_leaf("0.0", 0.8), scored_leaf("0.1", 0.3)});
        t.children[1].override_score = 0.6;
        t.children[0].claim.text = "x";
        const auto o = judge_option("H", t);
        REQUIRE(o.leaves.size() == 2);
        CHECK(o.leaves[0].first == "x");
        CHECK(o.leaves[1].second == doctest::Approx(0.6));
    }

    TEST_CASE("property: argmax follows permutations and picks the lowest index on ties") {
        CHECK(argmax(std::vector<Probability>{0.3, 0.8, 0.8}) == 1);
        CHECK(argmax(std::vector<Probability>{0.5, 0.5}) == 0);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 100; ++i) {
            std::vector<Probability> scores;
            for (int k = 0; k < 2 + static_cast<int>(rng() % 5); ++k) scores.push_back((rng() % 1000) / 1000.0 + k * 1e-7);
            const auto best = argmax(scores);
            std::vector<std::size_t> perm(scores.size());
            for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<Probability> shuffled;
            for (auto k : perm) shuffled.push_back(scores[k]);
            CHECK(perm[argmax(shuffled)] == best);
        }
    }
}
