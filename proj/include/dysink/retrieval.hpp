// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dysink/error.hpp"
#include "dysink/memory_bank.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

/// Mean cosine between an entry descriptor and each window descriptor.
inline double relevance_score(const BlockDescriptor& entry, std::span<const BlockDescriptor> window) {
    detail::require(!window.empty(), "relevance_score: empty window");
    double acc = 0.0;
    for (const auto& w : window) {
        detail::require(w.dim() == entry.dim(), "relevance_score: descriptor dimension mismatch");
        acc += cosine(w.f, entry.f);
    }
    return acc / static_cast<double>(window.size());
}

struct ScoredBlock {
    std::uint64_t block_index = 0;
    double score = 0.0;

    friend bool operator==(const ScoredBlock&, const ScoredBlock&) = default;
};

struct RetrievalResult {
    std::vector<ScoredBlock> selected; // score descending, ties by lower block_index
    std::size_t k_requested = 0;
    std::size_t k_returned = 0;
};

/// Strict ordering used for selection: higher score first, then lower block_index.
inline bool ranks_before(const ScoredBlock& a, const ScoredBlock& b) noexcept {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.block_index < b.block_index;
}

/// Top-k eligible entries (outside the window) by relevance to the window descriptors.
inline RetrievalResult retrieve_topk(const MemoryBank& bank, std::span<const BlockDescriptor> window_descriptors,
                                     const WindowSet& window_block_indices, std::size_t k) {
    detail::require(k >= 1, "retrieve_topk: k must be >= 1");
    RetrievalResult result;
    result.k_requested = k;
    const auto eligible = bank.eligible_entries(window_block_indices);
    if (eligible.empty()) {
        return result;
    }

    // Bounded insertion: `selected` stays sorted and holds at most k items.
    for (const MemoryEntry& e : eligible) {
        const ScoredBlock candidate{e.block_index, relevance_score(e.descriptor, window_descriptors)};
        if (result.selected.size() == k && !ranks_before(candidate, result.selected.back())) {
            continue;
        }
        auto pos = std::upper_bound(result.selected.begin(), result.selected.end(), candidate, ranks_before);
        result.selected.insert(pos, candidate);
        if (result.selected.size() > k) {
            result.selected.pop_back();
        }
    }
    result.k_returned = result.selected.size();
    return result;
}

// ============================================================================
// Context composition
// ============================================================================

enum class SegmentKind : std::uint8_t { Retrieved, Sink, Local };

struct Segment {
    SegmentKind kind = SegmentKind::Local;
    std::optional<std::uint64_t> block_index; // set for Retrieved segments
    std::size_t offset = 0;
    std::size_t tokens = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct LayerContext {
    std::size_t layer = 0;
    HeadTensor keys;
    HeadTensor values;
    std::vector<Segment> segments;

    std::size_t tokens() const noexcept { return keys.tokens(); }
};

struct AttentionContext {
    std::vector<LayerContext> layers;
};

namespace detail {

inline LayerContext compose_layer(std::span<const MemoryEntry* const> retrieved_sorted, const LayerKV& local) {
    local.validate();
    std::vector<const HeadTensor*> keys;
    std::vector<const HeadTensor*> values;
    std::vector<Segment> segments;
    std::size_t offset = 0;
    for (const MemoryEntry* e : retrieved_sorted) {
        require(local.layer < e->kv.size(), "compose_context: retrieved entry lacks layer");
        const LayerKV& kv = e->kv[local.layer];
        require(kv.keys.same_layout(local.keys), "compose_context: head layout mismatch");
        keys.push_back(&kv.keys);
        values.push_back(&kv.values);
        segments.push_back(Segment{SegmentKind::Retrieved, e->block_index, offset, kv.tokens()});
        offset += kv.tokens();
    }
    keys.push_back(&local.keys);
    values.push_back(&local.values);
    segments.push_back(Segment{SegmentKind::Local, std::nullopt, offset, local.tokens()});
    return LayerContext{local.layer, concat_tokens(keys), concat_tokens(values), std::move(segments)};
}

inline std::vector<const MemoryEntry*> sorted_by_block(std::span<const MemoryEntry* const> retrieved) {
    std::vector<const MemoryEntry*> sorted(retrieved.begin(), retrieved.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const MemoryEntry* a, const MemoryEntry* b) { return a->block_index < b->block_index; });
    return sorted;
}

} // namespace detail

/// Single layer: retrieved blocks (ascending block_index) followed by the local window.
inline LayerContext compose_layer_context(std::span<const MemoryEntry* const> retrieved, const LayerKV& local) {
    return detail::compose_layer(detail::sorted_by_block(retrieved), local);
}

/// Per layer token-axis concatenation: retrieved blocks ascending by block_index, then the local window.
inline AttentionContext compose_context(std::span<const MemoryEntry* const> retrieved, std::span<const LayerKV> local_kv) {
    const auto sorted = detail::sorted_by_block(retrieved);
    AttentionContext ctx;
    ctx.layers.reserve(local_kv.size());
    for (const LayerKV& local : local_kv) {
        ctx.layers.push_back(detail::compose_layer(sorted, local));
    }
    return ctx;
}

} // namespace dysink
