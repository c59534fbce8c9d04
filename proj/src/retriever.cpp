#include "bonsai/retriever.hpp"

#include <algorithm>

#include "bonsai/error.hpp"

namespace bonsai {

bool ranks_before(const EvidenceFactor& a, const EvidenceFactor& b) {
    const double ra = a.relevance.value_or(0.0), rb = b.relevance.value_or(0.0);
    if (ra != rb) return ra > rb;
    if (a.span.source_id != b.span.source_id) return a.span.source_id < b.span.source_id;
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.id < b.id;
}

std::vector<EvidenceFactor> retrieve_top_k(const Claim& claim, const EvidenceBank& bank, int k,
                                           const RelevanceBackend& relevance) {
    require(k >= 1, "retrieve_top_k: k must be >= 1");
    require(!bank.factors.empty(), "retrieve_top_k: evidence bank is empty");

    std::vector<std::string> texts;
    texts.reserve(bank.factors.size());
    for (const auto& f : bank.factors) texts.push_back(f.text);
    const auto scores = relevance.relevance(claim.text, texts);
    if (scores.size() != texts.size()) throw Error(ErrorKind::backend, "relevance backend returned a misaligned score list");

    std::vector<std::size_t> order(bank.factors.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        const auto& fa = bank.factors[a];
        const auto& fb = bank.factors[b];
        if (fa.span.source_id != fb.span.source_id) return fa.span.source_id < fb.span.source_id;
        if (fa.span.start != fb.span.start) return fa.span.start < fb.span.start;
        return fa.id < fb.id;
    };
    const auto take = std::min(static_cast<std::size_t>(k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);

    std::vector<EvidenceFactor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back(bank.factors[order[i]]);
        out.back().relevance = scores[order[i]];
    }
    return out;
}

std::vector<EvidenceFactor> order_temporal(std::vector<EvidenceFactor> factors) {
    std::stable_sort(factors.begin(), factors.end(),
                     [](const EvidenceFactor& a, const EvidenceFactor& b) { return a.span.start < b.span.start; });
    return factors;
}

}  // namespace bonsai
