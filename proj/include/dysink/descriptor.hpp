// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <random>
#include <vector>

#include "dysink/error.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

/// Encoded feature of one frame of a block.
struct FrameFeature {
    Vec raw;

    friend bool operator==(const FrameFeature&, const FrameFeature&) = default;
};

/// Unit-norm descriptor indexing one generated block.
struct BlockDescriptor {
    Vec f;
    std::uint64_t block_index = 0;

    std::size_t dim() const noexcept { return f.size(); }

    friend bool operator==(const BlockDescriptor&, const BlockDescriptor&) = default;
};

/// Latent content of one block: one vector per latent frame.
struct LatentBlock {
    std::vector<Vec> frames;
};

inline constexpr double kMinPooledNorm = 1e-12;

/**
 * Mean-pools frame features and l2-normalizes the result.
 *
 * Features are summed in lexicographic order of their values, so the result is
 * bit-identical for every permutation of the input list.
 */
inline BlockDescriptor encode_block(const std::vector<FrameFeature>& features, std::uint64_t block_index = 0) {
    detail::require(!features.empty(), "encode_block: empty feature list");
    const std::size_t dim = features.front().raw.size();
    detail::require(dim > 0, "encode_block: zero-dimensional features");

    std::vector<const Vec*> order;
    order.reserve(features.size());
    for (const auto& f : features) {
        detail::require(f.raw.size() == dim, "encode_block: feature dimension mismatch");
        order.push_back(&f.raw);
    }
    std::sort(order.begin(), order.end(), [](const Vec* a, const Vec* b) {
        return std::lexicographical_compare(a->raw().begin(), a->raw().end(), b->raw().begin(), b->raw().end());
    });

    std::vector<double> mean(dim, 0.0);
    for (const Vec* v : order) {
        for (std::size_t i = 0; i < dim; ++i) {
            mean[i] += (*v)[i];
        }
    }
    const auto n = static_cast<double>(features.size());
    for (double& x : mean) {
        x /= n;
    }
    const double len = norm(mean);
    detail::require(len >= kMinPooledNorm, "encode_block: pooled feature has zero norm");
    for (double& x : mean) {
        x /= len;
    }
    return BlockDescriptor{Vec(std::move(mean)), block_index};
}

/// Anything that turns a latent block into per-frame features.
template <class E>
concept FrameEncoder = requires(const E& encoder, const LatentBlock& block) {
    { encoder.encode(block) } -> std::same_as<std::vector<FrameFeature>>;
};

/**
 * Stand-in for a frozen visual encoder: a fixed Gaussian projection
 * (d x frame_dim, entries N(0, 1/d)) drawn from the seed.
 */
class SyntheticEncoder {
public:
    SyntheticEncoder(std::uint64_t seed, std::size_t frame_dim, std::size_t d)
        : seed_(seed), frame_dim_(frame_dim), d_(d), projection_(frame_dim * d) {
        detail::require(d >= 2, "SyntheticEncoder: d must be >= 2");
        detail::require(frame_dim >= 1, "SyntheticEncoder: frame_dim must be positive");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        for (double& w : projection_) {
            w = gauss(rng);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t frame_dim() const noexcept { return frame_dim_; }
    std::size_t dim() const noexcept { return d_; }

    /// Row-major d x frame_dim projection.
    std::span<const double> projection() const noexcept { return projection_; }

    FrameFeature encode_frame(const Vec& frame) const {
        detail::require(frame.size() == frame_dim_, "SyntheticEncoder: frame dimension mismatch");
        std::vector<double> out(d_, 0.0);
        for (std::size_t row = 0; row < d_; ++row) {
            out[row] = dot(std::span<const double>(projection_).subspan(row * frame_dim_, frame_dim_), frame.values());
        }
        return FrameFeature{Vec(std::move(out))};
    }

    std::vector<FrameFeature> encode(const LatentBlock& block) const {
        std::vector<FrameFeature> features;
        features.reserve(block.frames.size());
        for (const Vec& frame : block.frames) {
            features.push_back(encode_frame(frame));
        }
        return features;
    }

private:
    std::uint64_t seed_;
    std::size_t frame_dim_;
    std::size_t d_;
    std::vector<double> projection_;
};

static_assert(FrameEncoder<SyntheticEncoder>);

inline std::vector<FrameFeature> synthetic_encode(const LatentBlock& block, std::uint64_t encoder_seed, std::size_t d) {
    detail::require(!block.frames.empty(), "synthetic_encode: block has no frames");
    return SyntheticEncoder(encoder_seed, block.frames.front().size(), d).encode(block);
}

} // namespace dysink
