// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "dysink/error.hpp"
#include "dysink/memory_bank.hpp"
#include "dysink/retrieval.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

/// Per-head token mean of the block queries.
inline std::vector<Vec> representative_query(const HeadTensor& q) {
    detail::require(q.tokens() >= 1, "representative_query: zero query tokens");
    std::vector<Vec> out(q.heads(), Vec(q.head_dim()));
    const auto n = static_cast<double>(q.tokens());
    for (std::size_t h = 0; h < q.heads(); ++h) {
        for (std::size_t t = 0; t < q.tokens(); ++t) {
            const auto row = q.row(t, h);
            for (std::size_t i = 0; i < row.size(); ++i) {
                out[h][i] += row[i];
            }
        }
        for (std::size_t i = 0; i < q.head_dim(); ++i) {
            out[h][i] /= n;
        }
    }
    return out;
}

/// Mean raw inner product of q_bar with the head-h keys (no softmax, no scaling).
inline double affinity(const Vec& q_bar, const HeadTensor& keys, std::size_t head) {
    detail::require(keys.tokens() > 0, "affinity: empty key set");
    detail::require(head < keys.heads(), "affinity: head out of range");
    detail::require(q_bar.size() == keys.head_dim(), "affinity: head_dim mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < keys.tokens(); ++r) {
        acc += dot(q_bar.values(), keys.row(r, head));
    }
    return acc / static_cast<double>(keys.tokens());
}

/// Number of heads whose affinity to the retrieved keys strictly exceeds that to the local keys.
inline std::size_t consensus_count(const std::vector<Vec>& q_bar, const HeadTensor& k_ret, const HeadTensor& k_loc) {
    detail::require(k_ret.tokens() > 0 && k_loc.tokens() > 0, "consensus_fraction: empty key set");
    detail::require(k_ret.same_layout(k_loc), "consensus_fraction: key layout mismatch");
    detail::require(q_bar.size() == k_ret.heads(), "consensus_fraction: head count mismatch");
    std::size_t exceeding = 0;
    for (std::size_t h = 0; h < q_bar.size(); ++h) {
        if (affinity(q_bar[h], k_ret, h) > affinity(q_bar[h], k_loc, h)) {
            ++exceeding;
        }
    }
    return exceeding;
}

inline double consensus_fraction(const HeadTensor& q, const HeadTensor& k_ret, const HeadTensor& k_loc) {
    detail::require(q.same_layout(k_ret), "consensus_fraction: query/key layout mismatch");
    const auto q_bar = representative_query(q);
    return static_cast<double>(consensus_count(q_bar, k_ret, k_loc)) / static_cast<double>(q.heads());
}

struct GateDecision {
    std::size_t layer = 0;
    std::vector<double> rho; // one per retrieved block
    bool g = true;            // true: keep retrieved context
    double tau_gate = 0.5;

    double max_rho() const { return rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end()); }
};

/// g = 1 iff every rho <= tau_gate; an empty list keeps g = 1.
inline GateDecision gate_decision(std::vector<double> rhos, double tau_gate, std::size_t layer = 0) {
    detail::require(tau_gate > 0.0 && tau_gate < 1.0, "gate_decision: tau_gate must lie in (0, 1)");
    bool keep = true;
    for (double r : rhos) {
        detail::require(r >= 0.0 && r <= 1.0, "gate_decision: rho outside [0, 1]");
        keep = keep && r <= tau_gate;
    }
    return GateDecision{layer, std::move(rhos), keep, tau_gate};
}

/// One layer of the gated context: retrieved + local when g, local only otherwise.
inline LayerContext gated_layer_context(bool g, std::span<const MemoryEntry* const> retrieved, const LayerKV& local) {
    if (!g) {
        return compose_layer_context({}, local);
    }
    return compose_layer_context(retrieved, local);
}

inline AttentionContext gated_context(bool g, std::span<const MemoryEntry* const> retrieved,
                                      std::span<const LayerKV> local_kv) {
    if (!g) {
        return compose_context({}, local_kv);
    }
    return compose_context(retrieved, local_kv);
}

/// Per-layer gate bits; gates[i] applies to local_kv[i] only.
inline AttentionContext gated_context(const std::vector<bool>& gates, std::span<const MemoryEntry* const> retrieved,
                                      std::span<const LayerKV> local_kv) {
    detail::require(gates.size() == local_kv.size(), "gated_context: one gate bit per layer required");
    AttentionContext ctx;
    for (std::size_t i = 0; i < local_kv.size(); ++i) {
        ctx.layers.push_back(gated_layer_context(gates[i], retrieved, local_kv[i]));
    }
    return ctx;
}

} // namespace dysink
