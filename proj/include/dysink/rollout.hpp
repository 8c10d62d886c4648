// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "dysink/anomaly_gate.hpp"
#include "dysink/config.hpp"
#include "dysink/descriptor.hpp"
#include "dysink/memory_bank.hpp"
#include "dysink/retrieval.hpp"
#include "dysink/scenario.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

// ============================================================================
// Records
// ============================================================================

struct LayerRecord {
    std::size_t layer = 0;
    std::vector<double> rho;     // one per retrieved block, in retrieval order
    bool g = true;
    bool gate_evaluated = false; // false when nothing was retrieved
    std::size_t context_tokens = 0;
    std::uint64_t checksum = 0;

    friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

struct StepRecord {
    std::uint64_t block_index = 0;
    BlockLabel label;
    std::vector<ScoredBlock> retrieved;
    std::vector<std::uint64_t> anchors; // static sink blocks present in the context
    std::vector<LayerRecord> layers;
    std::optional<double> gate_rate;    // DySink only; empty until a gate was evaluated
    std::size_t hot_footprint = 0;
    std::size_t bank_size = 0;
    bool admitted = false;
    std::uint64_t attention_output_checksum = 0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// FNV-1a over the IEEE-754 bit patterns, little-endian byte order.
inline std::uint64_t fnv1a_bits(std::span<const double> values, std::uint64_t hash = 0xcbf29ce484222325ULL) {
    for (double x : values) {
        const auto bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
            hash ^= (bits >> (8 * b)) & 0xFF;
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

// ============================================================================
// Per-layer QKV projection
// ============================================================================

struct ProjectionParams {
    double key_noise = 0.5; // W_k = W_q + key_noise * N(0, 1/latent_dim)
    double sink_gain = 3.0; // latent channel 0 -> lowest-frequency rotary pair, every head
};

/// Fixed seeded linear maps from token latents to per-head Q, K, V.
class QkvProjection {
public:
    QkvProjection(const RolloutConfig& cfg, std::size_t layer, ProjectionParams params = {})
        : heads_(cfg.H), head_dim_(cfg.head_dim), latent_dim_(cfg.latent_dim) {
        const std::size_t rows = heads_ * head_dim_;
        wq_.assign(rows * latent_dim_, 0.0);
        wk_.assign(rows * latent_dim_, 0.0);
        wv_.assign(rows * latent_dim_, 0.0);
        std::mt19937_64 rng(cfg.seed * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL * (layer + 1));
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(latent_dim_)));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 1; c < latent_dim_; ++c) {
                const double w = gauss(rng);
                wq_[r * latent_dim_ + c] = w;
                wk_[r * latent_dim_ + c] = w + params.key_noise * gauss(rng);
            }
            for (std::size_t c = 0; c < latent_dim_; ++c) {
                wv_[r * latent_dim_ + c] = gauss(rng);
            }
        }
        for (std::size_t h = 0; h < heads_; ++h) {
            const std::size_t r = h * head_dim_ + head_dim_ - 2;
            wq_[r * latent_dim_] = params.sink_gain;
            wk_[r * latent_dim_] = params.sink_gain;
        }
    }

    struct Qkv {
        HeadTensor q, k, v;
    };

    /// token_latents: tokens x latent_dim, row-major.
    Qkv project(std::span<const double> token_latents) const {
        const std::size_t tokens = token_latents.size() / latent_dim_;
        Qkv out{HeadTensor(tokens, heads_, head_dim_), HeadTensor(tokens, heads_, head_dim_),
                HeadTensor(tokens, heads_, head_dim_)};
        for (std::size_t t = 0; t < tokens; ++t) {
            const auto x = token_latents.subspan(t * latent_dim_, latent_dim_);
            for (std::size_t h = 0; h < heads_; ++h) {
                for (std::size_t i = 0; i < head_dim_; ++i) {
                    const std::size_t r = (h * head_dim_ + i) * latent_dim_;
                    out.q.at(t, h, i) = dot(std::span<const double>(wq_).subspan(r, latent_dim_), x);
                    out.k.at(t, h, i) = dot(std::span<const double>(wk_).subspan(r, latent_dim_), x);
                    out.v.at(t, h, i) = dot(std::span<const double>(wv_).subspan(r, latent_dim_), x);
                }
            }
        }
        return out;
    }

private:
    std::size_t heads_;
    std::size_t head_dim_;
    std::size_t latent_dim_;
    std::vector<double> wq_, wk_, wv_;
};

// ============================================================================
// Streaming rollout
// ============================================================================

/**
 * Drives one policy over the synthetic stream, one block per step:
 * emit -> encode descriptor -> project QKV -> RoPE -> (retrieve + gate | sink | window)
 * -> attention over context plus the block's own keys -> bank insert -> retier -> record.
 *
 * Layers are independent projections of the same latents, so local-window KV
 * and queries do not depend on the policy.
 */
class Rollout {
public:
    explicit Rollout(RolloutConfig cfg)
        : cfg_(validated(std::move(cfg))),
          rope_{cfg_.rope_base, cfg_.head_dim},
          emitter_(cfg_),
          encoder_(cfg_.seed ^ 0xA0761D6478BD642FULL, cfg_.tokens_per_frame * cfg_.latent_dim, cfg_.d),
          bank_(cfg_.tau_dedup, cfg_.effective_init_count(), cfg_.cold_capacity) {
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            projections_.emplace_back(cfg_, l);
        }
        sink_.resize(cfg_.n_layers);
    }

    const RolloutConfig& config() const noexcept { return cfg_; }
    const MemoryBank& bank() const noexcept { return bank_; }
    const BlockEmitter& emitter() const noexcept { return emitter_; }
    std::uint64_t next_block() const noexcept { return emitter_.next_block_index(); }

    /// Attention output of the last step, per layer (current block tokens only).
    const std::vector<HeadTensor>& last_outputs() const noexcept { return last_outputs_; }
    /// Composed context of the last step, per layer (excludes the block's own tokens).
    const std::vector<LayerContext>& last_contexts() const noexcept { return last_contexts_; }
    /// Descriptor of the block processed by the last step.
    const BlockDescriptor& last_descriptor() const noexcept { return last_descriptor_; }

    StepRecord step() {
        const std::uint64_t j = emitter_.next_block_index();
        StepRecord rec;
        rec.block_index = j;
        rec.label = emitter_.label_of(j);

        const LatentBlock latent = emitter_.next();
        BlockDescriptor desc = encode_block(encoder_.encode(latent), j);
        const std::uint64_t start = j * cfg_.block_tokens();

        std::vector<double> token_latents;
        token_latents.reserve(cfg_.block_tokens() * cfg_.latent_dim);
        for (const Vec& frame : latent.frames) {
            token_latents.insert(token_latents.end(), frame.raw().begin(), frame.raw().end());
        }

        std::vector<HeadTensor> q_rot;
        std::vector<LayerKV> current_kv;
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            auto qkv = projections_[l].project(token_latents);
            q_rot.push_back(rope_rotate_tensor(qkv.q, start, rope_));
            current_kv.push_back(LayerKV{l, rope_rotate_tensor(qkv.k, start, rope_), std::move(qkv.v)});
        }

        // Local window: the W blocks preceding j, oldest first.
        WindowSet window_set;
        std::vector<BlockDescriptor> window_desc;
        for (const auto& w : window_) {
            window_set.insert(w.block_index);
            window_desc.push_back(w.descriptor);
        }
        const std::vector<LayerKV> local = local_kv();

        std::vector<const MemoryEntry*> retrieved;
        if (cfg_.policy.kind == PolicyKind::DySink && !window_.empty()) {
            const auto result = retrieve_topk(bank_, window_desc, window_set, cfg_.k);
            rec.retrieved = result.selected;
            for (const auto& s : result.selected) {
                retrieved.push_back(bank_.find(s.block_index));
            }
        }

        last_contexts_.clear();
        last_outputs_.clear();
        std::uint64_t total_hash = 0xcbf29ce484222325ULL;
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            LayerRecord lr;
            lr.layer = l;
            LayerContext ctx;
            switch (cfg_.policy.kind) {
            case PolicyKind::WindowOnly:
                ctx = compose_layer_context({}, local[l]);
                break;
            case PolicyKind::StaticSink:
                ctx = static_sink_context(local[l], window_set, j, rec.anchors, l == 0);
                break;
            case PolicyKind::DySink:
                if (!retrieved.empty()) {
                    const GateDecision gate = evaluate_gate(q_rot[l], start, retrieved, local[l], l);
                    lr.rho = gate.rho;
                    lr.g = gate.g;
                    lr.gate_evaluated = true;
                    ++gate_evaluations_;
                    gated_layers_ += gate.g ? 0 : 1;
                }
                ctx = gated_layer_context(lr.g, retrieved, local[l]);
                break;
            }
            lr.context_tokens = ctx.tokens();

            const HeadTensor* key_parts[] = {&ctx.keys, &current_kv[l].keys};
            const HeadTensor* value_parts[] = {&ctx.values, &current_kv[l].values};
            HeadTensor out = attention(q_rot[l], concat_tokens(key_parts), concat_tokens(value_parts),
                                       1.0 / std::sqrt(static_cast<double>(cfg_.head_dim)), ctx.tokens());
            lr.checksum = fnv1a_bits(out.flat());
            total_hash = fnv1a_bits(out.flat(), total_hash);
            rec.layers.push_back(std::move(lr));
            last_outputs_.push_back(std::move(out));
            last_contexts_.push_back(std::move(ctx));
        }
        rec.attention_output_checksum = total_hash;
        if (cfg_.policy.kind == PolicyKind::DySink && gate_evaluations_ > 0) {
            rec.gate_rate = static_cast<double>(gated_layers_) / static_cast<double>(gate_evaluations_);
        }

        if (cfg_.policy.kind == PolicyKind::StaticSink) {
            capture_sink(j, current_kv);
        }

        MemoryEntry entry{desc, current_kv, j, static_cast<std::uint32_t>(cfg_.L), start, Tier::Cold};
        rec.admitted = bank_.try_insert(std::move(entry)).admitted;
        std::set<std::uint64_t> hot;
        for (const auto& s : rec.retrieved) {
            hot.insert(s.block_index);
        }
        bank_.retier(hot);
        rec.hot_footprint = bank_.hot_footprint();
        rec.bank_size = bank_.size();

        window_.push_back(WindowBlock{j, desc, std::move(current_kv)});
        if (window_.size() > cfg_.W) {
            window_.pop_front();
        }
        last_descriptor_ = std::move(desc);
        return rec;
    }

private:
    struct WindowBlock {
        std::uint64_t block_index;
        BlockDescriptor descriptor;
        std::vector<LayerKV> kv;
    };

    // A token of the static sink: its block and per-layer key/value rows.
    struct SinkToken {
        std::uint64_t block_index;
        HeadTensor keys;
        HeadTensor values;
    };

    static RolloutConfig validated(RolloutConfig cfg) {
        cfg.validate();
        return cfg;
    }

    std::vector<LayerKV> local_kv() const {
        std::vector<LayerKV> local;
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            std::vector<const HeadTensor*> keys;
            std::vector<const HeadTensor*> values;
            const HeadTensor empty(0, cfg_.H, cfg_.head_dim);
            if (window_.empty()) {
                local.push_back(LayerKV{l, empty, empty});
                continue;
            }
            for (const auto& w : window_) {
                keys.push_back(&w.kv[l].keys);
                values.push_back(&w.kv[l].values);
            }
            local.push_back(LayerKV{l, concat_tokens(keys), concat_tokens(values)});
        }
        return local;
    }

    GateDecision evaluate_gate(const HeadTensor& q_rot, std::uint64_t q_start,
                               const std::vector<const MemoryEntry*>& retrieved, const LayerKV& local,
                               std::size_t layer) const {
        std::vector<double> rhos;
        if (cfg_.gate_affinity == GateAffinity::PostRope) {
            const auto q_bar = representative_query(q_rot);
            for (const MemoryEntry* e : retrieved) {
                rhos.push_back(static_cast<double>(consensus_count(q_bar, e->kv[layer].keys, local.keys)) /
                               static_cast<double>(cfg_.H));
            }
        } else {
            const auto q_bar = representative_query(rope_unrotate_tensor(q_rot, q_start, rope_));
            const std::uint64_t local_start = window_.front().block_index * cfg_.block_tokens();
            const HeadTensor k_loc = rope_unrotate_tensor(local.keys, local_start, rope_);
            for (const MemoryEntry* e : retrieved) {
                const HeadTensor k_ret = rope_unrotate_tensor(e->kv[layer].keys, e->start_position, rope_);
                rhos.push_back(static_cast<double>(consensus_count(q_bar, k_ret, k_loc)) /
                               static_cast<double>(cfg_.H));
            }
        }
        return gate_decision(std::move(rhos), cfg_.tau_gate, layer);
    }

    void capture_sink(std::uint64_t block, const std::vector<LayerKV>& kv) {
        const std::size_t budget = cfg_.policy.sink_frames * cfg_.tokens_per_frame;
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            for (std::size_t r = 0; r < kv[l].tokens() && sink_[l].size() < budget; ++r) {
                sink_[l].push_back(SinkToken{block, slice_tokens(kv[l].keys, r, 1), slice_tokens(kv[l].values, r, 1)});
            }
        }
    }

    // Sink tokens whose block is already in the window are not duplicated.
    LayerContext static_sink_context(const LayerKV& local, const WindowSet& window_set, std::uint64_t current,
                                     std::vector<std::uint64_t>& anchors, bool record_anchors) const {
        std::vector<const HeadTensor*> keys;
        std::vector<const HeadTensor*> values;
        for (const SinkToken& tok : sink_[local.layer]) {
            if (window_set.count(tok.block_index) || tok.block_index == current) {
                continue;
            }
            keys.push_back(&tok.keys);
            values.push_back(&tok.values);
            if (record_anchors && (anchors.empty() || anchors.back() != tok.block_index)) {
                anchors.push_back(tok.block_index);
            }
        }
        LayerContext local_ctx = compose_layer_context({}, local);
        if (keys.empty()) {
            return local_ctx;
        }
        const std::size_t sink_tokens = keys.size();
        keys.push_back(&local.keys);
        values.push_back(&local.values);
        LayerContext ctx{local.layer, concat_tokens(keys), concat_tokens(values), {}};
        ctx.segments.push_back(Segment{SegmentKind::Sink, std::nullopt, 0, sink_tokens});
        ctx.segments.push_back(Segment{SegmentKind::Local, std::nullopt, sink_tokens, local.tokens()});
        return ctx;
    }

    RolloutConfig cfg_;
    RopeParams rope_;
    BlockEmitter emitter_;
    SyntheticEncoder encoder_;
    MemoryBank bank_;
    std::vector<QkvProjection> projections_;
    std::deque<WindowBlock> window_;
    std::vector<std::vector<SinkToken>> sink_;
    std::vector<HeadTensor> last_outputs_;
    std::vector<LayerContext> last_contexts_;
    BlockDescriptor last_descriptor_;
    std::size_t gate_evaluations_ = 0;
    std::size_t gated_layers_ = 0;
};

inline std::vector<StepRecord> run_rollout(const RolloutConfig& cfg) {
    Rollout rollout(cfg);
    std::vector<StepRecord> trace;
    trace.reserve(cfg.total_blocks);
    for (std::size_t b = 0; b < cfg.total_blocks; ++b) {
        trace.push_back(rollout.step());
    }
    return trace;
}

} // namespace dysink
