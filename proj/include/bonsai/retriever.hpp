#pragma once

#include <vector>

#include "bonsai/backends.hpp"
#include "bonsai/types.hpp"

namespace bonsai {

/// Ranking order: relevance descending, then (source_id, span.start, id)
/// ascending. Both factors must carry a relevance score.
bool ranks_before(const EvidenceFactor& a, const EvidenceFactor& b);

/// The min(k, |bank|) factors most relevant to `claim`, best first, each
/// carrying its relevance score. Throws on an empty bank or k < 1.
std::vector<EvidenceFactor> retrieve_top_k(const Claim& claim, const EvidenceBank& bank, int k,
                                           const RelevanceBackend& relevance);

/// Stable sort by span start; relevance scores are untouched.
std::vector<EvidenceFactor> order_temporal(std::vector<EvidenceFactor> factors);

}  // namespace bonsai
