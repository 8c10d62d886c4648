// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace dysink;

namespace {

const RopeParams kRope{10000.0, 16};

} // namespace

TEST(RopeRotate, ZeroPositionIsIdentity) {
    std::mt19937_64 rng(1);
    const Vec v = oracle::random_vec(rng, 16);
    EXPECT_EQ(rope_rotate(v, 0, kRope), v);
}

TEST(RopeRotate, SinglePairRotatesByPosition) {
    const RopeParams p{10000.0, 2};
    for (std::uint64_t pos : {1u, 2u, 7u, 100u}) {
        const Vec out = rope_rotate(Vec{1.0, 0.0}, pos, p);
        EXPECT_NEAR(out[0], std::cos(static_cast<double>(pos)), 1e-15);
        EXPECT_NEAR(out[1], std::sin(static_cast<double>(pos)), 1e-15);
    }
}

TEST(RopeRotate, MatchesExplicitRotationMatrices) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::uint64_t> pos(0, 1'000'000);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec v = oracle::random_vec(rng, 16);
        const auto p = pos(rng);
        const Vec out = rope_rotate(v, p, kRope);
        const auto ref = oracle::rope_matrix(v.values(), static_cast<std::int64_t>(p), 10000.0L);
        for (std::size_t i = 0; i < 16; ++i) {
            ASSERT_NEAR(out[i], static_cast<double>(ref[i]), 1e-12);
        }
    }
}

TEST(RopeRotate, RelativePositionPropertyAgainstMatrixOracle) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> pos(0, 100'000);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec q = oracle::random_vec(rng, 16);
        const Vec k = oracle::random_vec(rng, 16);
        const auto p1 = pos(rng), p2 = pos(rng), s = pos(rng);
        // The oracle itself must satisfy the property.
        const auto ref_a = oracle::dot_ext(oracle::rope_matrix(q.values(), p1, 10000.0L),
                                           oracle::rope_matrix(k.values(), p2, 10000.0L));
        const auto ref_b = oracle::dot_ext(oracle::rope_matrix(q.values(), p1 + s, 10000.0L),
                                           oracle::rope_matrix(k.values(), p2 + s, 10000.0L));
        ASSERT_NEAR(static_cast<double>(ref_a), static_cast<double>(ref_b), 1e-9);

        const double a = dot(rope_rotate(q, p1, kRope), rope_rotate(k, p2, kRope));
        const double b = dot(rope_rotate(q, p1 + s, kRope), rope_rotate(k, p2 + s, kRope));
        ASSERT_NEAR(a, b, 1e-9);
        ASSERT_NEAR(a, static_cast<double>(ref_a), 1e-9);
    }
}

TEST(RopeRotate, PreservesNormUpToMillion) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> pos(0, 1'000'000);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec v = oracle::random_vec(rng, 16);
        ASSERT_NEAR(norm(rope_rotate(v, pos(rng), kRope)), norm(v), 1e-9);
    }
}

TEST(RopeRotate, RejectsBadShapes) {
    EXPECT_THROW(rope_rotate(Vec{1.0, 2.0, 3.0, 4.0}, 1, kRope), Error);
    EXPECT_THROW(rope_rotate(Vec{1.0, 2.0, 3.0}, 1, RopeParams{10000.0, 3}), Error);
    EXPECT_THROW(rope_rotate(Vec{1.0, 2.0}, 1, RopeParams{1.0, 2}), Error);
}

TEST(RopeRotateTensor, SingleTokenAtZeroIsIdentity) {
    std::mt19937_64 rng(5);
    const HeadTensor t = oracle::random_tensor(rng, 1, 4, 16);
    EXPECT_EQ(rope_rotate_tensor(t, 0, kRope), t);
}

TEST(RopeRotateTensor, MatchesPerVectorLoopAndKeepsNorms) {
    std::mt19937_64 rng(6);
    const HeadTensor t = oracle::random_tensor(rng, 5, 3, 16);
    const std::uint64_t start = 12345;
    const HeadTensor out = rope_rotate_tensor(t, start, kRope);
    for (std::size_t r = 0; r < t.tokens(); ++r) {
        for (std::size_t h = 0; h < t.heads(); ++h) {
            const Vec in(std::vector<double>(t.row(r, h).begin(), t.row(r, h).end()));
            const Vec expected = rope_rotate(in, start + r, kRope);
            for (std::size_t i = 0; i < 16; ++i) {
                EXPECT_EQ(out.at(r, h, i), expected[i]);
            }
            EXPECT_NEAR(norm(out.row(r, h)), norm(t.row(r, h)), 1e-9);
        }
    }
}

TEST(RopeRotateTensor, UnrotateInvertsRotate) {
    std::mt19937_64 rng(7);
    const HeadTensor t = oracle::random_tensor(rng, 6, 2, 16);
    const HeadTensor back = rope_unrotate_tensor(rope_rotate_tensor(t, 999, kRope), 999, kRope);
    for (std::size_t i = 0; i < t.flat().size(); ++i) {
        EXPECT_NEAR(back.flat()[i], t.flat()[i], 1e-14);
    }
}

TEST(RopeRotateTensor, HeadDimMismatchThrows) {
    EXPECT_THROW(rope_rotate_tensor(HeadTensor(2, 2, 8), 0, kRope), Error);
}

TEST(Attention, SingleKeyReturnsItsValue) {
    std::mt19937_64 rng(8);
    const HeadTensor q = oracle::random_tensor(rng, 4, 2, 4);
    const HeadTensor k = oracle::random_tensor(rng, 1, 2, 4);
    const HeadTensor v = oracle::random_tensor(rng, 1, 2, 4);
    const HeadTensor out = attention(q, k, v, 0.5);
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t i = 0; i < 4; ++i) {
                EXPECT_DOUBLE_EQ(out.at(t, h, i), v.at(0, h, i));
            }
        }
    }
}

TEST(Attention, IdenticalKeysAverageValues) {
    std::mt19937_64 rng(9);
    const HeadTensor q = oracle::random_tensor(rng, 2, 1, 4);
    HeadTensor k(3, 1, 4);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < 4; ++i) {
            k.at(r, 0, i) = 0.25 * static_cast<double>(i);
        }
    }
    const HeadTensor v = oracle::random_tensor(rng, 3, 1, 4);
    const HeadTensor out = attention(q, k, v, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
        const double mean = (v.at(0, 0, i) + v.at(1, 0, i) + v.at(2, 0, i)) / 3.0;
        EXPECT_NEAR(out.at(0, 0, i), mean, 1e-15);
        EXPECT_NEAR(out.at(1, 0, i), mean, 1e-15);
    }
}

TEST(Attention, MatchesNaiveOracle) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const HeadTensor q = oracle::random_tensor(rng, 3, 2, 8);
        const HeadTensor k = oracle::random_tensor(rng, 3, 2, 8);
        const HeadTensor v = oracle::random_tensor(rng, 3, 2, 8);
        const double scale = 1.0 / std::sqrt(8.0);
        const HeadTensor out = attention(q, k, v, scale);
        const auto ref = oracle::attention_naive(q, k, v, scale);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            ASSERT_NEAR(out.flat()[i], static_cast<double>(ref[i]), 1e-9);
        }
    }
}

TEST(Attention, OutputsAreConvexCombinationsOfValues) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const HeadTensor q = oracle::random_tensor(rng, 4, 2, 4);
        const HeadTensor k = oracle::random_tensor(rng, 7, 2, 4);
        const HeadTensor v = oracle::random_tensor(rng, 7, 2, 4);
        const HeadTensor out = attention(q, k, v, 3.0);
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t i = 0; i < 4; ++i) {
                double lo = 1e300, hi = -1e300;
                for (std::size_t r = 0; r < 7; ++r) {
                    lo = std::min(lo, v.at(r, h, i));
                    hi = std::max(hi, v.at(r, h, i));
                }
                for (std::size_t t = 0; t < 4; ++t) {
                    ASSERT_GE(out.at(t, h, i), lo - 1e-9);
                    ASSERT_LE(out.at(t, h, i), hi + 1e-9);
                }
            }
        }
    }
}

TEST(Attention, LargeLogitsStayFinite) {
    HeadTensor q(1, 1, 2, {1000.0, 0.0});
    HeadTensor k(2, 1, 2, {1000.0, 0.0, -1000.0, 0.0});
    HeadTensor v(2, 1, 2, {1.0, 2.0, 3.0, 4.0});
    const HeadTensor out = attention(q, k, v, 1.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1), 2.0);
}

TEST(Attention, CausalPrefixLimitsVisibleKeys) {
    std::mt19937_64 rng(12);
    const HeadTensor q = oracle::random_tensor(rng, 2, 1, 4);
    const HeadTensor k = oracle::random_tensor(rng, 5, 1, 4);
    const HeadTensor v = oracle::random_tensor(rng, 5, 1, 4);
    const HeadTensor out = attention(q, k, v, 0.5, 3);
    // query 0 sees keys 0..3, query 1 sees 0..4
    const HeadTensor first = attention(slice_tokens(q, 0, 1), slice_tokens(k, 0, 4), slice_tokens(v, 0, 4), 0.5);
    const HeadTensor second = attention(slice_tokens(q, 1, 1), k, v, 0.5);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(out.at(0, 0, i), first.at(0, 0, i));
        EXPECT_EQ(out.at(1, 0, i), second.at(0, 0, i));
    }
}

TEST(Attention, RejectsBadInputs) {
    const HeadTensor q(1, 2, 4), k(0, 2, 4), v(0, 2, 4);
    EXPECT_THROW(attention(q, k, v, 1.0), Error);
    EXPECT_THROW(attention(q, HeadTensor(2, 2, 4), HeadTensor(3, 2, 4), 1.0), Error);
    EXPECT_THROW(attention(q, HeadTensor(2, 1, 4), HeadTensor(2, 1, 4), 1.0), Error);
}

TEST(Cosine, BasicValues) {
    EXPECT_DOUBLE_EQ(cosine(Vec{1.0, 0.0}, Vec{0.0, 1.0}), 0.0);
    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        const Vec x = oracle::random_vec(rng, 9);
        EXPECT_NEAR(cosine(x, x), 1.0, 1e-15);
    }
    EXPECT_THROW(cosine(Vec{0.0, 0.0}, Vec{1.0, 0.0}), Error);
    EXPECT_THROW(cosine(Vec{1.0}, Vec{1.0, 0.0}), Error);
}

TEST(Cosine, MatchesExtendedPrecisionAndIsSymmetricScaleInvariant) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec a = oracle::random_vec(rng, 16);
        const Vec b = oracle::random_vec(rng, 16);
        const double c = cosine(a, b);
        ASSERT_NEAR(c, static_cast<double>(oracle::cosine_ext(a, b)), 1e-12);
        ASSERT_NEAR(c, cosine(b, a), 1e-12);
        const double s = scale(rng);
        std::vector<double> scaled(a.raw());
        for (double& x : scaled) {
            x *= s;
        }
        ASSERT_NEAR(c, cosine(Vec(scaled), b), 1e-12);
        ASSERT_GE(c, -1.0);
        ASSERT_LE(c, 1.0);
    }
}

TEST(HeadTensor, RejectsInvalidShapes) {
    EXPECT_THROW(HeadTensor(1, 1, 3), Error);
    EXPECT_THROW(HeadTensor(1, 0, 2), Error);
    EXPECT_THROW(HeadTensor(1, 1, 2, {1.0}), Error);
    EXPECT_THROW(HeadTensor(1, 1, 2, {1.0, std::nan("")}), Error);
}

TEST(HeadTensor, SliceRecoversConcatParts) {
    std::mt19937_64 rng(15);
    const HeadTensor a = oracle::random_tensor(rng, 2, 2, 4);
    const HeadTensor b = oracle::random_tensor(rng, 3, 2, 4);
    const HeadTensor* parts[] = {&a, &b};
    const HeadTensor c = concat_tokens(parts);
    EXPECT_EQ(slice_tokens(c, 0, 2), a);
    EXPECT_EQ(slice_tokens(c, 2, 3), b);
}
