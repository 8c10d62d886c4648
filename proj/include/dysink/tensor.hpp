// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dysink/error.hpp"

namespace dysink {

// ============================================================================
// Dense value types
// ============================================================================

/// Dense real vector with finite entries.
class Vec {
public:
    Vec() = default;

    explicit Vec(std::size_t len, double fill = 0.0) : data_(len, fill) {}

    explicit Vec(std::vector<double> data) : data_(std::move(data)) {
        for (double x : data_) {
            detail::require(std::isfinite(x), "Vec: non-finite entry");
        }
    }

    Vec(std::initializer_list<double> init) : Vec(std::vector<double>(init)) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    const std::vector<double>& raw() const noexcept { return data_; }

    friend bool operator==(const Vec&, const Vec&) = default;

private:
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double dot(const Vec& a, const Vec& b) { return dot(a.values(), b.values()); }

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }
inline double norm(const Vec& a) { return norm(a.values()); }

/// Tokens x heads x head_dim tensor, row-major. head_dim must be even (rotary pairing).
class HeadTensor {
public:
    HeadTensor() = default;

    HeadTensor(std::size_t tokens, std::size_t heads, std::size_t head_dim)
        : tokens_(tokens), heads_(heads), head_dim_(head_dim), data_(tokens * heads * head_dim, 0.0) {
        check_shape();
    }

    HeadTensor(std::size_t tokens, std::size_t heads, std::size_t head_dim, std::vector<double> data)
        : tokens_(tokens), heads_(heads), head_dim_(head_dim), data_(std::move(data)) {
        check_shape();
        detail::require(data_.size() == tokens_ * heads_ * head_dim_, "HeadTensor: data size mismatch");
        for (double x : data_) {
            detail::require(std::isfinite(x), "HeadTensor: non-finite entry");
        }
    }

    std::size_t tokens() const noexcept { return tokens_; }
    std::size_t heads() const noexcept { return heads_; }
    std::size_t head_dim() const noexcept { return head_dim_; }
    std::size_t row_stride() const noexcept { return heads_ * head_dim_; }

    std::span<const double> row(std::size_t token, std::size_t head) const {
        return {data_.data() + offset(token, head), head_dim_};
    }
    std::span<double> row(std::size_t token, std::size_t head) {
        return {data_.data() + offset(token, head), head_dim_};
    }

    double at(std::size_t token, std::size_t head, std::size_t i) const { return data_[offset(token, head) + i]; }
    double& at(std::size_t token, std::size_t head, std::size_t i) { return data_[offset(token, head) + i]; }

    std::span<const double> flat() const noexcept { return data_; }

    bool same_layout(const HeadTensor& other) const noexcept {
        return heads_ == other.heads_ && head_dim_ == other.head_dim_;
    }

    friend bool operator==(const HeadTensor&, const HeadTensor&) = default;

private:
    void check_shape() const {
        detail::require(heads_ > 0, "HeadTensor: heads must be positive");
        detail::require(head_dim_ > 0 && head_dim_ % 2 == 0, "HeadTensor: head_dim must be positive and even");
    }

    std::size_t offset(std::size_t token, std::size_t head) const noexcept {
        return (token * heads_ + head) * head_dim_;
    }

    std::size_t tokens_ = 0;
    std::size_t heads_ = 1;
    std::size_t head_dim_ = 2;
    std::vector<double> data_;
};

/// Token-axis concatenation; all parts must share heads/head_dim.
inline HeadTensor concat_tokens(std::span<const HeadTensor* const> parts) {
    detail::require(!parts.empty(), "concat_tokens: no parts");
    const HeadTensor& first = *parts.front();
    std::size_t total = 0;
    for (const HeadTensor* p : parts) {
        detail::require(p->same_layout(first), "concat_tokens: layout mismatch");
        total += p->tokens();
    }
    std::vector<double> data;
    data.reserve(total * first.row_stride());
    for (const HeadTensor* p : parts) {
        data.insert(data.end(), p->flat().begin(), p->flat().end());
    }
    return HeadTensor(total, first.heads(), first.head_dim(), std::move(data));
}

inline HeadTensor slice_tokens(const HeadTensor& t, std::size_t begin, std::size_t count) {
    detail::require(begin + count <= t.tokens(), "slice_tokens: range out of bounds");
    const std::size_t stride = t.row_stride();
    auto first = t.flat().begin() + static_cast<std::ptrdiff_t>(begin * stride);
    std::vector<double> data(first, first + static_cast<std::ptrdiff_t>(count * stride));
    return HeadTensor(count, t.heads(), t.head_dim(), std::move(data));
}

// ============================================================================
// Rotary position embedding (interleaved pairs 2i, 2i+1)
// ============================================================================

struct RopeParams {
    double base = 10000.0;
    std::size_t head_dim = 16;

    void validate() const {
        detail::require(base > 1.0 && std::isfinite(base), "RopeParams: base must be > 1");
        detail::require(head_dim > 0 && head_dim % 2 == 0, "RopeParams: head_dim must be positive and even");
    }
};

namespace detail {

struct PairRotation {
    double c;
    double s;
};

// Angles are evaluated in extended precision; at positions near 1e6 a double
// product loses ~1e-10 rad, which is visible in relative-position checks.
inline std::vector<PairRotation> rotation_table(std::int64_t position, const RopeParams& params) {
    const auto dim = static_cast<long double>(params.head_dim);
    const auto base = static_cast<long double>(params.base);
    std::vector<PairRotation> table(params.head_dim / 2);
    for (std::size_t i = 0; i < table.size(); ++i) {
        const long double inv_freq = std::pow(base, -2.0L * static_cast<long double>(i) / dim);
        const long double angle = static_cast<long double>(position) * inv_freq;
        table[i] = {static_cast<double>(std::cos(angle)), static_cast<double>(std::sin(angle))};
    }
    return table;
}

inline void rotate_pairs(std::span<double> v, std::span<const PairRotation> table) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double x0 = v[2 * i];
        const double x1 = v[2 * i + 1];
        v[2 * i] = x0 * table[i].c - x1 * table[i].s;
        v[2 * i + 1] = x0 * table[i].s + x1 * table[i].c;
    }
}

inline HeadTensor rotate_tensor(const HeadTensor& t, std::uint64_t start_position, const RopeParams& params,
                                bool inverse) {
    params.validate();
    require(t.head_dim() == params.head_dim, "rope_rotate_tensor: head_dim mismatch");
    HeadTensor out = t;
    for (std::size_t r = 0; r < t.tokens(); ++r) {
        const auto pos = static_cast<std::int64_t>(start_position + r);
        const auto table = rotation_table(inverse ? -pos : pos, params);
        for (std::size_t h = 0; h < t.heads(); ++h) {
            rotate_pairs(out.row(r, h), table);
        }
    }
    return out;
}

} // namespace detail

inline Vec rope_rotate(const Vec& v, std::uint64_t position, const RopeParams& params) {
    params.validate();
    detail::require(v.size() == params.head_dim, "rope_rotate: vector length != head_dim");
    Vec out = v;
    detail::rotate_pairs(out.values(), detail::rotation_table(static_cast<std::int64_t>(position), params));
    return out;
}

/// Token r is rotated at absolute position start_position + r.
inline HeadTensor rope_rotate_tensor(const HeadTensor& t, std::uint64_t start_position, const RopeParams& params) {
    return detail::rotate_tensor(t, start_position, params, false);
}

/// Inverse of rope_rotate_tensor for the same start_position.
inline HeadTensor rope_unrotate_tensor(const HeadTensor& t, std::uint64_t start_position, const RopeParams& params) {
    return detail::rotate_tensor(t, start_position, params, true);
}

// ============================================================================
// Reference attention
// ============================================================================

/// Softmax attention per head. With causal_prefix = P, query t sees keys [0, P + t].
inline HeadTensor attention(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v, double scale,
                            std::optional<std::size_t> causal_prefix = std::nullopt) {
    detail::require(k.tokens() > 0, "attention: empty key set");
    detail::require(k.tokens() == v.tokens(), "attention: key/value token count mismatch");
    detail::require(q.same_layout(k) && k.same_layout(v), "attention: heads/head_dim mismatch");
    detail::require(scale > 0.0 && std::isfinite(scale), "attention: scale must be positive");
    if (causal_prefix) {
        detail::require(*causal_prefix + q.tokens() <= k.tokens(), "attention: causal prefix exceeds key set");
    }

    HeadTensor out(q.tokens(), q.heads(), q.head_dim());
    std::vector<double> weights(k.tokens());
    for (std::size_t h = 0; h < q.heads(); ++h) {
        for (std::size_t t = 0; t < q.tokens(); ++t) {
            const std::size_t visible = causal_prefix ? *causal_prefix + t + 1 : k.tokens();
            const auto qt = q.row(t, h);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < visible; ++r) {
                weights[r] = scale * dot(qt, k.row(r, h));
                max_logit = std::max(max_logit, weights[r]);
            }
            double denom = 0.0;
            for (std::size_t r = 0; r < visible; ++r) {
                weights[r] = std::exp(weights[r] - max_logit);
                denom += weights[r];
            }
            auto ot = out.row(t, h);
            for (std::size_t r = 0; r < visible; ++r) {
                const double w = weights[r] / denom;
                const auto vr = v.row(r, h);
                for (std::size_t i = 0; i < ot.size(); ++i) {
                    ot[i] += w * vr[i];
                }
            }
        }
    }
    return out;
}

// ============================================================================
// Similarity
// ============================================================================

inline double cosine(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "cosine: length mismatch");
    const double na = norm(a);
    const double nb = norm(b);
    detail::require(na > 0.0 && nb > 0.0, "cosine: zero-norm input");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine(const Vec& a, const Vec& b) { return cosine(a.values(), b.values()); }

} // namespace dysink
