// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dysink/config.hpp"
#include "dysink/rollout.hpp"

namespace dysink {

struct RevisitStats {
    std::size_t steps = 0;
    std::size_t hits = 0;

    std::optional<double> rate() const {
        if (steps == 0) {
            return std::nullopt;
        }
        return static_cast<double>(hits) / static_cast<double>(steps);
    }
};

/**
 * Revisit steps are blocks whose scene already occurred in an earlier epoch and
 * whose whole window lies in the current epoch. A step hits when any long-range
 * block in its context (retrieved or sink anchor) comes from an earlier epoch of
 * the same scene.
 */
inline RevisitStats revisit_stats(const std::vector<StepRecord>& trace, std::size_t window_blocks) {
    std::map<std::uint64_t, BlockLabel> labels;
    std::map<std::int64_t, std::int64_t> first_epoch_of_scene;
    for (const auto& r : trace) {
        labels[r.block_index] = r.label;
        first_epoch_of_scene.emplace(r.label.scene, r.label.epoch);
    }
    RevisitStats stats;
    for (const auto& r : trace) {
        if (first_epoch_of_scene.at(r.label.scene) >= r.label.epoch || r.block_index < window_blocks) {
            continue;
        }
        bool window_in_epoch = true;
        for (std::uint64_t w = r.block_index - window_blocks; w < r.block_index; ++w) {
            const auto it = labels.find(w);
            window_in_epoch = window_in_epoch && it != labels.end() && it->second.epoch == r.label.epoch;
        }
        if (!window_in_epoch) {
            continue;
        }
        ++stats.steps;
        std::vector<std::uint64_t> long_range = r.anchors;
        for (const auto& s : r.retrieved) {
            long_range.push_back(s.block_index);
        }
        const bool hit = std::any_of(long_range.begin(), long_range.end(), [&](std::uint64_t b) {
            const auto it = labels.find(b);
            return it != labels.end() && it->second.scene == r.label.scene && it->second.epoch < r.label.epoch;
        });
        stats.hits += hit ? 1 : 0;
    }
    return stats;
}

struct PolicySummary {
    Policy policy;
    std::size_t steps = 0;
    std::optional<double> gate_rate;            // DySink only
    std::optional<double> mean_retrieval_score; // DySink only, over all retrieved entries
    double mean_context_tokens = 0.0;
    std::size_t max_context_tokens = 0;
    std::size_t final_bank_size = 0;
    RevisitStats revisit;
};

inline PolicySummary summarize(const Policy& policy, const std::vector<StepRecord>& trace, std::size_t window_blocks) {
    PolicySummary s;
    s.policy = policy;
    s.steps = trace.size();
    double score_sum = 0.0;
    std::size_t score_count = 0;
    std::size_t context_sum = 0;
    std::size_t layer_count = 0;
    for (const auto& r : trace) {
        for (const auto& sb : r.retrieved) {
            score_sum += sb.score;
            ++score_count;
        }
        for (const auto& l : r.layers) {
            context_sum += l.context_tokens;
            s.max_context_tokens = std::max(s.max_context_tokens, l.context_tokens);
            ++layer_count;
        }
    }
    if (policy.kind == PolicyKind::DySink) {
        if (!trace.empty()) {
            s.gate_rate = trace.back().gate_rate;
        }
        if (score_count > 0) {
            s.mean_retrieval_score = score_sum / static_cast<double>(score_count);
        }
    }
    if (layer_count > 0) {
        s.mean_context_tokens = static_cast<double>(context_sum) / static_cast<double>(layer_count);
    }
    if (!trace.empty()) {
        s.final_bank_size = trace.back().bank_size;
    }
    s.revisit = revisit_stats(trace, window_blocks);
    return s;
}

struct ComparisonSummary {
    RolloutConfig base;
    std::vector<PolicySummary> policies; // window, static, dysink
};

/// Runs WindowOnly, StaticSink and DySink on the same stream, concurrently.
inline ComparisonSummary compare_policies(const RolloutConfig& base) {
    base.validate();
    const std::size_t sink_frames = base.policy.kind == PolicyKind::StaticSink ? base.policy.sink_frames : 6;
    const std::vector<Policy> policies = {Policy::window_only(), Policy::static_sink(sink_frames), Policy::dysink()};

    std::vector<std::future<PolicySummary>> jobs;
    for (const Policy& p : policies) {
        RolloutConfig cfg = base;
        cfg.policy = p;
        jobs.push_back(std::async(std::launch::async, [cfg] {
            return summarize(cfg.policy, run_rollout(cfg), cfg.W);
        }));
    }
    ComparisonSummary summary{base, {}};
    for (auto& job : jobs) {
        summary.policies.push_back(job.get());
    }
    return summary;
}

} // namespace dysink
