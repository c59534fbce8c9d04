#include "doctest.h"

#include <random>

#include "bonsai/error.hpp"
#include "bonsai/serialize.hpp"
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

bool has_kind(const std::vector<Violation>& vs, ViolationKind kind) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.kind == kind; });
}

ScoreTrace trace(double anchor, std::vector<double> steps) {
    ScoreTrace t;
    t.anchor_explanation = "anchor";
    t.anchor_score = anchor;
    for (std::size_t i = 0; i < steps.size(); ++i) t.steps.push_back({"f" + std::to_string(i), "step", steps[i]});
    t.final = steps.empty() ? anchor : steps.back();
    return t;
}

/// Leaf ids by definition: nodes without children, minus pruned nodes and anything under them.
std::vector<std::string> leaves_by_definition(const TreeNode& n) {
    if (n.pruned) return {};
    if (n.children.empty()) return {n.id};
    std::vector<std::string> out;
    for (const auto& c : n.children) {
        auto sub = leaves_by_definition(c);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

}  // namespace

TEST_SUITE("core-model") {
    TEST_CASE("validate_tree accepts a single-node tree") {
        RunConfig config;
        CHECK(validate_tree(node("0", "Ice melts."), config).empty());
    }

    TEST_CASE("validate_tree reports one depth violation for depth 4 under limit 3") {
        RunConfig config;
        config.decomposition_max = 3;
        auto deep = node("0", "r", {node("0.0", "a", {node("0.0.0", "b", {node("0.0.0.0", "c", {node("0.0.0.0.0", "d"), node("0.0.0.0.1", "e")}), node("0.0.0.1", "f")}), node("0.0.1", "g")}), node("0.1", "h")});
        for (auto* l : leaves(deep)) l->claim.atomic = true;
        const auto vs = validate_tree(deep, config);
        REQUIRE(vs.size() == 2);  // both depth-4 leaves
        CHECK(std::all_of(vs.begin(), vs.end(), [](const Violation& v) { return v.kind == ViolationKind::depth_exceeded; }));

        auto one = node("0", "r", {node("0.0", "a", {node("0.0.0", "b", {node("0.0.0.0", "c", {node("0.0.0.0.0", "d")})})})});
        const auto single = validate_tree(one, config);
        REQUIRE(single.size() == 1);
        CHECK(single[0].kind == ViolationKind::depth_exceeded);
        CHECK(single[0].node_id == "0.0.0.0.0");
    }

    TEST_CASE("validate_tree detects a duplicate id") {
        RunConfig config;
        auto t = node("0", "r", {node("0.0", "a"), node("0.0", "b")});
        const auto vs = validate_tree(t, config);
        REQUIRE(vs.size() == 1);
        CHECK(vs[0].kind == ViolationKind::duplicate_id);
    }

    TEST_CASE("validate_tree flags out-of-range scores, empty and untrimmed claims, atomic parents") {
        RunConfig config;
        auto t = node("0", "r", {node("0.0", "a"), node("0.1", "b")});
        t.children[0].score_trace = trace(0.1, {1.2});
        CHECK(has_kind(validate_tree(t, config), ViolationKind::probability_range));

        t = node("0", "r", {node("0.0", "a"), node("0.1", "b")});
        t.propagated_prob = -0.1;
        CHECK(has_kind(validate_tree(t, config), ViolationKind::probability_range));

        t = node("0", "", {});
        CHECK(has_kind(validate_tree(t, config), ViolationKind::empty_claim));
        t = node("0", " padded ", {});
        CHECK(has_kind(validate_tree(t, config), ViolationKind::untrimmed_claim));

        t = node("0", "r", {node("0.0", "a"), node("0.1", "b")});
        t.claim.atomic = true;
        CHECK(has_kind(validate_tree(t, config), ViolationKind::atomic_with_children));

        t = node("0", "r");
        auto bad = trace(0.1, {0.2, 0.3});
        bad.final = 0.9;
        t.score_trace = bad;
        CHECK(has_kind(validate_tree(t, config), ViolationKind::trace_inconsistent));
    }

    TEST_CASE("check_trace enforces final = last step and non-empty explanations") {
        CHECK(check_trace(trace(0.1, {0.2, 0.2, 0.6})).empty());
        CHECK(check_trace(trace(0.4, {})).empty());
        auto t = trace(0.1, {0.2});
        t.steps[0].explanation = "";
        CHECK_FALSE(check_trace(t).empty());
    }

    TEST_CASE("leaves: single node, pruned left leaf, depth-3 document order") {
        auto single = node("0", "r");
        REQUIRE(leaves(single).size() == 1);
        CHECK(leaves(single)[0]->id == "0");

        auto binary = node("0", "r", {node("0.0", "a"), node("0.1", "b")});
        binary.children[0].pruned = true;
        REQUIRE(leaves(binary).size() == 1);
        CHECK(leaves(binary)[0]->id == "0.1");

        auto deep = node("0", "r", {node("0.0", "a", {node("0.0.0", "c", {node("0.0.0.0", "e"), node("0.0.0.1", "f")}), node("0.0.1", "d")}), node("0.1", "b")});
        std::vector<std::string> ids;
        for (const auto* l : leaves(deep)) ids.push_back(l->id);
        CHECK(ids == std::vector<std::string>{"0.0.0.0", "0.0.0.1", "0.0.1", "0.1"});
    }

    TEST_CASE("property: random trees are valid, leaves match the definition, roundtrip is identity") {
        std::mt19937_64 rng(17);
        RunConfig config;
        config.decomposition_max = 4;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            auto t = testing::random_tree(rng, 4, 3, 0.15);
            visit(t, [&](TreeNode& n, int) {
                if (n.is_leaf()) {
                    n.score_trace = trace(std::round(u(rng) * 10) / 10, {std::round(u(rng) * 10) / 10});
                    if (u(rng) < 0.2) n.override_score = u(rng);
                }
                n.propagated_prob = u(rng);
            });
            CAPTURE(i);
            CHECK(validate_tree(t, config).empty());

            std::vector<std::string> got;
            for (const auto* l : leaves(t)) got.push_back(l->id);
            CHECK(got == leaves_by_definition(t));

            CHECK(deserialize_tree(serialize_tree(t)) == t);

            // Mutating a single invariant is detected.
            auto broken = t;
            leaves(broken)[0]->propagated_prob = 1.2;
            CHECK_FALSE(validate_tree(broken, config).empty());
            auto dup = t;
            if (!dup.children.empty()) {
                dup.children.back().id = dup.children.front().id;
                CHECK_FALSE(validate_tree(dup, config).empty());
            }
            RunConfig tight = config;
            tight.decomposition_max = std::max(1, tree_depth(t) - 1);
            if (tree_depth(t) > 1) CHECK_FALSE(validate_tree(t, tight).empty());
        }
    }

    TEST_CASE("roundtrip keeps Unicode claim text") {
        auto t = node("0", "Der Eisbär schläft — 北極熊が眠る 🐻‍❄️", {node("0.0", "Снег идёт."), node("0.1", "ثلج")});
        t.children[1].pruned = true;
        t.children[0].evidence.push_back({"f0", "00:00:14 Ein Bär.", {"clip", SpanModality::video_frame, 14, 14, "00:00:14"}, 0.5});
        CHECK(deserialize_tree(serialize_tree(t)) == t);
    }

    TEST_CASE("malformed tree documents name the offending field") {
        auto doc = serialize_tree(node("0", "r", {node("0.0", "a"), node("0.1", "b")}));
        CHECK_THROWS_AS(deserialize_tree(doc.substr(0, doc.size() / 2)), Error);
        auto j = to_json(node("0", "r", {node("0.0", "a"), node("0.1", "b")}));
        j["children"][1]["claim"].erase("text");
        try {
            tree_from_json(j);
            FAIL("expected a parse error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::parse);
            CHECK(std::string(e.what()).find("tree.children[1].claim.text") != std::string::npos);
        }
        j = to_json(node("0", "r"));
        j["propagated_prob"] = "high";
        CHECK_THROWS_AS(tree_from_json(j), Error);
    }

    TEST_CASE("bank documents are one record per line and roundtrip") {
        EvidenceBank bank;
        bank.sources.push_back({"t1", SourceModality::transcript, "t1.tsv", 60});
        bank.sources.push_back({"img", SourceModality::image, "a.png", 0});
        bank.factors.push_back({"t1#0.0", "00:00:04 Two people argue.", {"t1", SpanModality::transcript, 4, 20, "00:00:04"}, std::nullopt});
        bank.factors.push_back({"img#0.0", "A dog sits.", {"img", SpanModality::image, 0, 0, std::nullopt}, 0.25});
        const auto doc = serialize_bank(bank);
        const auto lines = text::split_lines(doc);
        std::size_t non_empty = 0;
        for (const auto& l : lines) non_empty += !l.empty();
        CHECK(non_empty == 4);
        const auto factor_line = parse_json(lines[2], "line");
        for (const char* key : {"id", "text", "source_id", "modality", "start", "end", "timestamp_label"})
            CHECK(factor_line.contains(key));
        CHECK(factor_line["modality"] == "transcript");
        CHECK(deserialize_bank(doc) == bank);
    }

    TEST_CASE("config: table columns parse, unknown keys and bad invariants are rejected") {
        const auto c = config_from_json(parse_json(R"({"vb":"mock","db":"mock","fs":"eq1","dm":2,"em":5,"te":true,
            "el":"leaf","ag":"mean","tau":0.8,"theta":0.4,"window":6,"stride":3})", "c"));
        CHECK(c.decomposition_max == 2);
        CHECK(c.evidence_max == 5);
        CHECK(c.temporal_enhancement);
        CHECK(c.evidence_level == EvidenceLevel::leaf);
        CHECK(c.aggregation == Aggregation::mean);
        CHECK(c.frame_sampling == FrameSamplingParams{});
        CHECK(config_from_json(to_json(c)) == c);

        CHECK_THROWS_AS(config_from_json(parse_json(R"({"depth":3})", "c")), Error);
        CHECK_THROWS_AS(config_from_json(parse_json(R"({"ag":"vote"})", "c")), Error);
        auto bad = c;
        bad.frame_sampling = FrameSamplingParams{1, 6, 10, 20, 3, 40};
        CHECK_THROWS_AS(validate_config(bad), Error);
        bad = c;
        bad.evidence_max = 0;
        CHECK_THROWS_AS(validate_config(bad), Error);
    }
}
