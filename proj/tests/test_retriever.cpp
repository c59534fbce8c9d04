#include "doctest.h"

#include <random>

#include "bonsai/error.hpp"
#include "bonsai/retriever.hpp"
#include "support.hpp"

using namespace bonsai;

namespace {

/// Relevance backend returning a fixed score per candidate text.
class TableRelevance final : public RelevanceBackend {
public:
    explicit TableRelevance(std::map<std::string, double> table) : table_(std::move(table)) {}
    std::vector<double> relevance(std::string_view, std::span<const std::string> candidates) const override {
        std::vector<double> out;
        for (const auto& c : candidates) out.push_back(table_.at(c));
        return out;
    }

private:
    std::map<std::string, double> table_;
};

EvidenceFactor factor(std::string id, std::string text, std::string source, double start) {
    return {std::move(id), std::move(text), {std::move(source), SpanModality::transcript, start, start, std::nullopt},
            std::nullopt};
}

std::vector<std::string> ids(const std::vector<EvidenceFactor>& fs) {
    std::vector<std::string> out;
    for (const auto& f : fs) out.push_back(f.id);
    return out;
}

}  // namespace

TEST_SUITE("retriever") {
    TEST_CASE("top-2 of [0.1, 0.9, 0.9, 0.3, 0.2] breaks the tie by span start") {
        EvidenceBank bank;
        bank.factors = {factor("a", "t0", "s", 0), factor("b", "t1", "s", 20), factor("c", "t2", "s", 10),
                        factor("d", "t3", "s", 30), factor("e", "t4", "s", 40)};
        TableRelevance rel({{"t0", 0.1}, {"t1", 0.9}, {"t2", 0.9}, {"t3", 0.3}, {"t4", 0.2}});
        const auto top = retrieve_top_k({"claim", true}, bank, 2, rel);
        CHECK(ids(top) == std::vector<std::string>{"c", "b"});
        CHECK(top[0].relevance == std::optional<double>(0.9));

        const auto all = retrieve_top_k({"claim", true}, bank, 10, rel);
        CHECK(ids(all) == std::vector<std::string>{"c", "b", "d", "e", "a"});
    }

    TEST_CASE("empty bank and k < 1 are precondition errors") {
        TableRelevance rel({});
        EvidenceBank empty;
        CHECK_THROWS_AS(retrieve_top_k({"claim", true}, empty, 3, rel), Error);
        EvidenceBank one;
        one.factors = {factor("a", "x", "s", 0)};
        TableRelevance rel1({{"x", 0.5}});
        CHECK_THROWS_AS(retrieve_top_k({"claim", true}, one, 0, rel1), Error);
    }

    TEST_CASE("order_temporal sorts by start, stable, keeps relevance") {
        auto a = factor("a", "x", "s", 30);
        a.relevance = 0.9;
        auto b = factor("b", "y", "s", 10);
        b.relevance = 0.5;
        auto c = factor("c", "z", "t", 10);
        const auto ordered = order_temporal({a, b, c});
        CHECK(ids(ordered) == std::vector<std::string>{"b", "c", "a"});
        CHECK(ordered[2].relevance == std::optional<double>(0.9));
    }

    TEST_CASE("property: top-k matches an exhaustive ranking over 100 random banks") {
        std::mt19937_64 rng(41);
        for (int round = 0; round < 100; ++round) {
            const int n = 1 + static_cast<int>(rng() % 25);
            EvidenceBank bank;
            std::map<std::string, double> table;
            for (int i = 0; i < n; ++i) {
                const std::string text = "text " + std::to_string(i);
                // Coarse scores force frequent ties.
                table[text] = static_cast<double>(rng() % 5) / 4.0;
                bank.factors.push_back(factor("f" + std::to_string(rng() % 1000) + "_" + std::to_string(i), text,
                                              "s" + std::to_string(rng() % 3), static_cast<double>(rng() % 6)));
            }
            TableRelevance rel(table);
            const int k = 1 + static_cast<int>(rng() % 8);

            // Oracle: score everything, sort fully with the ranking order, take k.
            auto scored = bank.factors;
            for (auto& f : scored) f.relevance = table[f.text];
            std::sort(scored.begin(), scored.end(), ranks_before);
            scored.resize(std::min<std::size_t>(static_cast<std::size_t>(k), scored.size()));

            const auto got = retrieve_top_k({"claim", true}, bank, k, rel);
            CAPTURE(round);
            CHECK(got == scored);
            CHECK(got.size() == std::min<std::size_t>(static_cast<std::size_t>(k), bank.factors.size()));

            // Bank order does not matter.
            auto shuffled = bank;
            std::shuffle(shuffled.factors.begin(), shuffled.factors.end(), rng);
            CHECK(retrieve_top_k({"claim", true}, shuffled, k, rel) == got);
        }
    }
}
