// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dysink/config.hpp"
#include "dysink/descriptor.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

/// Shape constants of the synthetic streams. Not part of the config file.
struct ScenarioParams {
    double frame_noise = 0.03;     // per-token latent noise
    double drift_step = 0.04;      // random-walk step of the content direction per block
    std::size_t revisit_cycle = 3; // scenes cycled after the intro scene
    std::size_t epoch_blocks = 12;
    double adversarial_drift = 0.0;
    double sink_amplitude = 1.0;   // sink channel on the first W blocks (Adversarial)
    double sink_floor = 0.2;       // sink channel on every later block (Adversarial)
};

/// Scene/epoch labels of an emitted block. Drift and Adversarial streams are one scene, one epoch.
struct BlockLabel {
    std::int64_t scene = 0;
    std::int64_t epoch = 0;

    friend bool operator==(const BlockLabel&, const BlockLabel&) = default;
};

/**
 * Seeded synthetic latent stream standing in for the video generator.
 *
 * Every token latent has latent_dim channels. Channel 0 is the sink channel,
 * which the QKV projections route into the lowest-frequency rotary pair of every
 * head; channels 1.. carry scene content.
 *
 *  - Drift: the content direction takes a small random-walk step every block.
 *  - Revisit: an intro scene, then a fixed cycle of scenes, each held for one epoch.
 *  - Adversarial: static content; the first W blocks carry a large sink
 *    channel, every later block a small one.
 */
class BlockEmitter {
public:
    explicit BlockEmitter(const RolloutConfig& cfg, ScenarioParams params = {})
        : cfg_(cfg), params_(params), rng_(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x51ED270B3A1D4E27ULL) {
        cfg_.validate();
        const std::size_t scenes = cfg_.scenario == Scenario::Revisit ? 1 + params_.revisit_cycle : 1;
        for (std::size_t s = 0; s < scenes; ++s) {
            scenes_.push_back(random_direction());
        }
        direction_ = scenes_.front();
    }

    const ScenarioParams& params() const noexcept { return params_; }
    std::uint64_t next_block_index() const noexcept { return next_; }

    /// Scene schedule; valid for any block index without emitting.
    BlockLabel label_of(std::uint64_t block) const {
        if (cfg_.scenario != Scenario::Revisit) {
            return {};
        }
        const auto epoch = static_cast<std::int64_t>(block / params_.epoch_blocks);
        const auto cycle = static_cast<std::int64_t>(params_.revisit_cycle);
        const std::int64_t scene = epoch == 0 ? 0 : 1 + (epoch - 1) % cycle;
        return {scene, epoch};
    }

    LatentBlock next() {
        const std::uint64_t block = next_++;
        switch (cfg_.scenario) {
        case Scenario::Drift:
            if (block > 0) {
                step_direction(params_.drift_step);
            }
            return render(direction_, 0.0);
        case Scenario::Revisit:
            return render(scenes_[static_cast<std::size_t>(label_of(block).scene)], 0.0);
        case Scenario::Adversarial:
            if (block > 0) {
                step_direction(params_.adversarial_drift);
            }
            return render(direction_, block < cfg_.W ? params_.sink_amplitude : params_.sink_floor);
        }
        return {};
    }

private:
    std::vector<double> random_direction() {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> dir(cfg_.latent_dim, 0.0);
        for (std::size_t c = 1; c < dir.size(); ++c) {
            dir[c] = gauss(rng_);
        }
        normalize(dir);
        return dir;
    }

    void step_direction(double step) {
        if (step <= 0.0) {
            return;
        }
        std::normal_distribution<double> gauss(0.0, step);
        for (std::size_t c = 1; c < direction_.size(); ++c) {
            direction_[c] += gauss(rng_);
        }
        normalize(direction_);
    }

    static void normalize(std::vector<double>& v) {
        const double n = norm(v);
        for (double& x : v) {
            x /= n;
        }
    }

    LatentBlock render(const std::vector<double>& content, double sink) {
        std::normal_distribution<double> noise(0.0, params_.frame_noise);
        LatentBlock block;
        block.frames.reserve(cfg_.L);
        for (std::size_t f = 0; f < cfg_.L; ++f) {
            std::vector<double> frame;
            frame.reserve(cfg_.tokens_per_frame * cfg_.latent_dim);
            for (std::size_t t = 0; t < cfg_.tokens_per_frame; ++t) {
                frame.push_back(sink);
                for (std::size_t c = 1; c < cfg_.latent_dim; ++c) {
                    frame.push_back(content[c] + noise(rng_));
                }
            }
            block.frames.emplace_back(std::move(frame));
        }
        return block;
    }

    RolloutConfig cfg_;
    ScenarioParams params_;
    std::mt19937_64 rng_;
    std::vector<std::vector<double>> scenes_;
    std::vector<double> direction_;
    std::uint64_t next_ = 0;
};

} // namespace dysink
