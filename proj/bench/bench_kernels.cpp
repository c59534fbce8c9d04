// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "bonsai/backends.hpp"
#include "bonsai/inference.hpp"
#include "bonsai/retriever.hpp"
#include "bonsai/tree.hpp"

using namespace bonsai;

namespace {

std::vector<std::string> sentences(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::string> vocab{"the", "a", "man", "nurse", "clinic", "briefcase", "door", "storm",
                                                "street", "tree", "parade", "closed", "opens", "finds", "asks", "river"};
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        for (int w = 0; w < 6 + static_cast<int>(rng() % 10); ++w) s += vocab[rng() % vocab.size()] + " ";
        out.push_back(s);
    }
    return out;
}

void BM_LexicalRelevance(benchmark::State& state, Exec exec) {
    const auto cands = sentences(static_cast<std::size_t>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(lexical_relevance("a man asks about the briefcase", cands, exec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Retrieval(benchmark::State& state, Exec exec) {
    EvidenceBank bank;
    const auto texts = sentences(static_cast<std::size_t>(state.range(0)), 11);
    for (std::size_t i = 0; i < texts.size(); ++i)
        bank.factors.push_back({"f" + std::to_string(i), texts[i],
                                {"s", SpanModality::text, static_cast<double>(i), static_cast<double>(i + 1), std::nullopt},
                                std::nullopt});
    LexicalRelevance relevance(exec);
    for (auto _ : state) benchmark::DoNotOptimize(retrieve_top_k({"the nurse finds the briefcase", true}, bank, 5, relevance));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

/// Full binary tree of the given depth.
TreeNode binary_tree(const std::string& id, int depth) {
    TreeNode n;
    n.id = id;
    n.claim = {"claim " + id, depth == 0};
    if (depth > 0)
        for (std::size_t i = 0; i < 2; ++i) n.children.push_back(binary_tree(child_id(id, i), depth - 1));
    return n;
}

/// Scorer with a fixed response; the cost is dominated by prompt building, retrieval and parsing.
struct InferenceSetup {
    EvidenceBank bank;
    std::string summary = "A clinic on a weekday.";
    std::string counterfactual;
    RunConfig config;
    Backends backends;

    InferenceSetup() {
        const auto texts = sentences(400, 3);
        bank.sources.push_back({"s", SourceModality::text, "s.txt", static_cast<double>(texts.size())});
        for (std::size_t i = 0; i < texts.size(); ++i)
            bank.factors.push_back({"f" + std::to_string(i), texts[i],
                                    {"s", SpanModality::text, static_cast<double>(i), static_cast<double>(i + 1), std::nullopt},
                                    std::nullopt});
        config.decomposition_max = 6;
        backends.scorer = std::make_shared<CallbackChat>([](const ChatRequest& req) {
            std::size_t items = 0;
            for (std::size_t at = req.prompt.rfind("NEW INFORMATION:"); (at = req.prompt.find("\n(", at + 1)) != std::string::npos;)
                ++items;
            std::string out = "(0) EXPLANATION: anchor\nSCORE: 5\n";
            for (std::size_t i = 1; i <= items; ++i) out += "(" + std::to_string(i) + ") EXPLANATION: step\nSCORE: 6\n";
            return out;
        });
        backends.chat = backends.vision = backends.scorer;
        backends.relevance = std::make_shared<LexicalRelevance>(Exec::serial);
    }
    InferenceContext ctx() const { return {bank, summary, counterfactual, config, backends}; }
};

void BM_InferParallel(benchmark::State& state) {
    InferenceSetup setup;
    const auto tree = binary_tree("0", static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto t = tree;
        benchmark::DoNotOptimize(infer(t, setup.ctx(), {}, Exec::parallel));
    }
}

void BM_InferReference(benchmark::State& state) {
    InferenceSetup setup;
    const auto tree = binary_tree("0", static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto t = tree;
        benchmark::DoNotOptimize(infer_reference(t, setup.ctx()));
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_LexicalRelevance, serial, Exec::serial)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(BM_LexicalRelevance, parallel, Exec::parallel)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(BM_Retrieval, serial, Exec::serial)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(BM_Retrieval, parallel, Exec::parallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_InferReference)->Arg(3)->Arg(5);
BENCHMARK(BM_InferParallel)->Arg(3)->Arg(5);

BENCHMARK_MAIN();
