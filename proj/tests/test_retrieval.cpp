// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace dysink;

namespace {

MemoryBank bank_of(const std::vector<Vec>& descriptors, std::mt19937_64& rng, std::uint64_t first_index = 0) {
    MemoryBank bank(0.98, descriptors.size());
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        bank.try_insert(oracle::make_entry(descriptors[i], first_index + i, rng));
    }
    return bank;
}

std::vector<BlockDescriptor> window_of(std::initializer_list<Vec> vs) {
    std::vector<BlockDescriptor> out;
    std::uint64_t i = 1000;
    for (const Vec& v : vs) {
        out.push_back(BlockDescriptor{v, i++});
    }
    return out;
}

} // namespace

TEST(RelevanceScore, IdenticalAndOrthogonal) {
    const Vec u{1.0, 0.0, 0.0};
    const Vec v{0.0, 1.0, 0.0};
    EXPECT_DOUBLE_EQ(relevance_score(BlockDescriptor{u, 0}, window_of({u, u, u})), 1.0);
    EXPECT_DOUBLE_EQ(relevance_score(BlockDescriptor{u, 0}, window_of({v, v})), 0.0);
    EXPECT_NEAR(relevance_score(BlockDescriptor{u, 0}, window_of({u, v})), 0.5, 1e-15);
    EXPECT_THROW(relevance_score(BlockDescriptor{u, 0}, {}), Error);
}

TEST(RelevanceScore, MatchesExtendedPrecision) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const BlockDescriptor e{oracle::random_unit(rng, 64), 0};
        std::vector<BlockDescriptor> window;
        for (int i = 0; i < 3; ++i) {
            window.push_back(BlockDescriptor{oracle::random_unit(rng, 64), static_cast<std::uint64_t>(i + 1)});
        }
        const double s = relevance_score(e, window);
        ASSERT_NEAR(s, static_cast<double>(oracle::relevance_ext(e, window)), 1e-12);
        ASSERT_GE(s, -1.0);
        ASSERT_LE(s, 1.0);
    }
}

TEST(RetrieveTopK, FewerEligibleThanK) {
    std::mt19937_64 rng(2);
    const auto window = window_of({Vec{1.0, 0.0}});
    MemoryBank empty(0.98, 3);
    auto r = retrieve_topk(empty, window, {}, 2);
    EXPECT_TRUE(r.selected.empty());
    EXPECT_EQ(r.k_returned, 0u);
    EXPECT_EQ(r.k_requested, 2u);

    const MemoryBank one = bank_of({Vec{0.6, 0.8}}, rng);
    r = retrieve_topk(one, window, {}, 2);
    ASSERT_EQ(r.k_returned, 1u);
    EXPECT_EQ(r.selected.front().block_index, 0u);

    EXPECT_THROW(retrieve_topk(one, window, {}, 0), Error);
}

TEST(RetrieveTopK, TiesPreferLowerBlockIndex) {
    std::mt19937_64 rng(3);
    const Vec u{0.6, 0.8};
    const MemoryBank bank = bank_of({u, u, u, Vec{0.8, 0.6}}, rng, 10);
    const auto r = retrieve_topk(bank, window_of({u}), {}, 2);
    ASSERT_EQ(r.selected.size(), 2u);
    EXPECT_EQ(r.selected[0].block_index, 10u);
    EXPECT_EQ(r.selected[1].block_index, 11u);
}

TEST(RetrieveTopK, ExcludesWindowBlocks) {
    std::mt19937_64 rng(4);
    const Vec u{0.6, 0.8};
    const MemoryBank bank = bank_of({u, Vec{0.8, 0.6}, Vec{0.0, 1.0}}, rng);
    const auto r = retrieve_topk(bank, window_of({u}), {0}, 3);
    ASSERT_EQ(r.selected.size(), 2u);
    for (const auto& s : r.selected) {
        EXPECT_NE(s.block_index, 0u);
    }
}

TEST(RetrieveTopK, MatchesFullSortOracle) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> kd(1, 8);
    std::bernoulli_distribution dup(0.2);
    std::bernoulli_distribution excl(0.1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vec> ds;
        for (int i = 0; i < 100; ++i) {
            ds.push_back(!ds.empty() && dup(rng) ? ds[ds.size() / 2] : oracle::random_unit(rng, 16));
        }
        const MemoryBank bank = bank_of(ds, rng);
        std::vector<BlockDescriptor> window;
        for (int i = 0; i < 3; ++i) {
            window.push_back(BlockDescriptor{oracle::random_unit(rng, 16), static_cast<std::uint64_t>(200 + i)});
        }
        WindowSet excluded;
        for (std::uint64_t i = 0; i < 100; ++i) {
            if (excl(rng)) {
                excluded.insert(i);
            }
        }
        const std::size_t k = kd(rng);
        const auto got = retrieve_topk(bank, window, excluded, k);
        const auto expected = oracle::topk_by_full_sort(bank, window, excluded, k);
        ASSERT_EQ(got.selected, expected) << "trial " << trial;
        ASSERT_EQ(got.k_returned, expected.size());
    }
}

TEST(ComposeContext, NoRetrievalIsLocalBitExact) {
    std::mt19937_64 rng(6);
    const LayerKV local{0, oracle::random_tensor(rng, 18, 2, 4), oracle::random_tensor(rng, 18, 2, 4)};
    const LayerContext ctx = compose_layer_context({}, local);
    EXPECT_EQ(ctx.keys, local.keys);
    EXPECT_EQ(ctx.values, local.values);
    ASSERT_EQ(ctx.segments.size(), 1u);
    EXPECT_EQ(ctx.segments[0].kind, SegmentKind::Local);
}

TEST(ComposeContext, RetrievedFirstInBlockOrder) {
    std::mt19937_64 rng(7);
    const MemoryEntry a = oracle::make_entry(Vec{1.0, 0.0}, 4, rng, 1, 3);
    const MemoryEntry b = oracle::make_entry(Vec{0.0, 1.0}, 9, rng, 1, 3);
    const LayerKV local{0, oracle::random_tensor(rng, 18, 2, 4), oracle::random_tensor(rng, 18, 2, 4)};
    const std::vector<const MemoryEntry*> retrieved{&b, &a}; // deliberately out of order
    const LayerContext ctx = compose_layer_context(retrieved, local);

    ASSERT_EQ(ctx.tokens(), 24u);
    ASSERT_EQ(ctx.segments.size(), 3u);
    EXPECT_EQ(ctx.segments[0].block_index, std::optional<std::uint64_t>(4));
    EXPECT_EQ(ctx.segments[1].block_index, std::optional<std::uint64_t>(9));
    EXPECT_EQ(ctx.segments[2].offset, 6u);
    EXPECT_EQ(ctx.segments[2].tokens, 18u);

    EXPECT_EQ(slice_tokens(ctx.keys, 0, 3), a.kv[0].keys);
    EXPECT_EQ(slice_tokens(ctx.values, 3, 3), b.kv[0].values);
    EXPECT_EQ(slice_tokens(ctx.keys, 6, 18), local.keys);
    EXPECT_EQ(slice_tokens(ctx.values, 6, 18), local.values);
}

TEST(ComposeContext, AllLayersAndLayoutErrors) {
    std::mt19937_64 rng(8);
    const MemoryEntry a = oracle::make_entry(Vec{1.0, 0.0}, 1, rng, 2, 3);
    std::vector<LayerKV> local;
    for (std::size_t l = 0; l < 2; ++l) {
        local.push_back(LayerKV{l, oracle::random_tensor(rng, 5, 2, 4), oracle::random_tensor(rng, 5, 2, 4)});
    }
    const std::vector<const MemoryEntry*> retrieved{&a};
    const AttentionContext ctx = compose_context(retrieved, local);
    ASSERT_EQ(ctx.layers.size(), 2u);
    EXPECT_EQ(slice_tokens(ctx.layers[1].keys, 0, 3), a.kv[1].keys);

    const LayerKV wrong{0, oracle::random_tensor(rng, 5, 4, 4), oracle::random_tensor(rng, 5, 4, 4)};
    EXPECT_THROW(compose_layer_context(retrieved, wrong), Error);
    const LayerKV missing{2, oracle::random_tensor(rng, 5, 2, 4), oracle::random_tensor(rng, 5, 2, 4)};
    EXPECT_THROW(compose_layer_context(retrieved, missing), Error);
}
