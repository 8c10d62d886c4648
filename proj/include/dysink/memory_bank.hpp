// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "dysink/descriptor.hpp"
#include "dysink/error.hpp"
#include "dysink/tensor.hpp"

namespace dysink {

enum class Tier : std::uint8_t { Hot = 0, Cold = 1 };

/// Keys and values of one block at one layer, stored post-RoPE.
struct LayerKV {
    std::size_t layer = 0;
    HeadTensor keys;
    HeadTensor values;

    std::size_t tokens() const noexcept { return keys.tokens(); }

    void validate() const {
        detail::require(keys.tokens() == values.tokens() && keys.same_layout(values),
                        "LayerKV: keys and values disagree in shape");
    }

    friend bool operator==(const LayerKV&, const LayerKV&) = default;
};

struct MemoryEntry {
    BlockDescriptor descriptor;
    std::vector<LayerKV> kv; // kv[l].layer == l
    std::uint64_t block_index = 0;
    std::uint32_t frames = 0;          // latent frames in the block
    std::uint64_t start_position = 0;  // absolute position of the first token
    Tier tier = Tier::Cold;

    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct InsertResult {
    bool admitted = false;
    /// Max cosine against the bank at admission time; empty when the bank was empty.
    std::optional<double> max_similarity;
};

using WindowSet = std::set<std::uint64_t>;
using EntryRef = std::reference_wrapper<const MemoryEntry>;

/**
 * Ordered bank of (descriptor, layer-wise KV) entries.
 *
 * The first init_count insertions are admitted unconditionally. After that a
 * candidate is admitted iff its max cosine to every current entry is
 * <= tau_dedup, so near-duplicates never displace the earlier entry.
 *
 * Single writer: try_insert/set_tier/retier must be serialized by the caller;
 * const members may run concurrently with each other.
 */
class MemoryBank {
public:
    MemoryBank(double tau_dedup, std::size_t init_count, std::size_t cold_capacity = 0)
        : tau_dedup_(tau_dedup), init_count_(init_count), cold_capacity_(cold_capacity) {
        detail::require(tau_dedup > 0.0 && tau_dedup <= 1.0, "MemoryBank: tau_dedup must lie in (0, 1]");
    }

    double tau_dedup() const noexcept { return tau_dedup_; }
    std::size_t init_count() const noexcept { return init_count_; }
    std::size_t cold_capacity() const noexcept { return cold_capacity_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
    std::size_t admitted_total() const noexcept { return admitted_total_; }

    InsertResult try_insert(MemoryEntry entry) {
        validate_entry(entry);
        std::optional<double> max_sim;
        for (const auto& existing : entries_) {
            const double c = cosine(entry.descriptor.f, existing.descriptor.f);
            max_sim = max_sim ? std::max(*max_sim, c) : c;
        }
        const bool initializing = admitted_total_ < init_count_;
        if (!initializing && max_sim && *max_sim > tau_dedup_) {
            return InsertResult{false, max_sim};
        }
        entries_.push_back(std::move(entry));
        ++admitted_total_;
        enforce_cold_capacity();
        return InsertResult{true, max_sim};
    }

    void set_tier(std::uint64_t block_index, Tier tier) {
        find_mutable(block_index).tier = tier;
        enforce_cold_capacity();
    }

    /// Entries listed in `hot` become Hot, every other entry Cold.
    void retier(const std::set<std::uint64_t>& hot) {
        for (std::uint64_t idx : hot) {
            find_mutable(idx);
        }
        for (auto& e : entries_) {
            e.tier = hot.count(e.block_index) ? Tier::Hot : Tier::Cold;
        }
        enforce_cold_capacity();
    }

    const MemoryEntry* find(std::uint64_t block_index) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), block_index,
                                   [](const MemoryEntry& e, std::uint64_t idx) { return e.block_index < idx; });
        return (it != entries_.end() && it->block_index == block_index) ? &*it : nullptr;
    }

    std::vector<EntryRef> eligible_entries(const WindowSet& window_block_indices) const {
        std::vector<EntryRef> out;
        for (const auto& e : entries_) {
            if (!window_block_indices.count(e.block_index)) {
                out.emplace_back(e);
            }
        }
        return out;
    }

    std::size_t hot_footprint() const noexcept {
        std::size_t frames = 0;
        for (const auto& e : entries_) {
            if (e.tier == Tier::Hot) {
                frames += e.frames;
            }
        }
        return frames;
    }

    friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

    void write_snapshot(std::ostream& out) const;
    static MemoryBank read_snapshot(std::istream& in);

private:
    MemoryEntry& find_mutable(std::uint64_t block_index) {
        auto* e = const_cast<MemoryEntry*>(find(block_index));
        if (e == nullptr) {
            throw Error("MemoryBank: unknown block_index " + std::to_string(block_index));
        }
        return *e;
    }

    void validate_entry(const MemoryEntry& entry) const {
        detail::require(entry.block_index == entry.descriptor.block_index,
                        "MemoryBank: entry and descriptor block_index differ");
        detail::require(!entry.kv.empty(), "MemoryBank: entry has no layers");
        for (std::size_t l = 0; l < entry.kv.size(); ++l) {
            detail::require(entry.kv[l].layer == l, "MemoryBank: kv must cover each layer once, in order");
            entry.kv[l].validate();
            detail::require(entry.kv[l].keys.same_layout(entry.kv.front().keys), "MemoryBank: layer layout mismatch");
        }
        if (entries_.empty()) {
            return;
        }
        const MemoryEntry& last = entries_.back();
        detail::require(entry.block_index > last.block_index, "MemoryBank: block_index must increase");
        detail::require(entry.descriptor.dim() == last.descriptor.dim(), "MemoryBank: descriptor dimension mismatch");
        detail::require(entry.kv.size() == last.kv.size(), "MemoryBank: layer count mismatch");
        detail::require(entry.kv.front().keys.same_layout(last.kv.front().keys), "MemoryBank: head layout mismatch");
    }

    // Optional cap on offloaded entries; oldest Cold entries go first.
    void enforce_cold_capacity() {
        if (cold_capacity_ == 0) {
            return;
        }
        auto cold = static_cast<std::size_t>(
            std::count_if(entries_.begin(), entries_.end(), [](const MemoryEntry& e) { return e.tier == Tier::Cold; }));
        for (auto it = entries_.begin(); cold > cold_capacity_ && it != entries_.end();) {
            if (it->tier == Tier::Cold) {
                it = entries_.erase(it);
                --cold;
            } else {
                ++it;
            }
        }
    }

    double tau_dedup_;
    std::size_t init_count_;
    std::size_t cold_capacity_;
    std::size_t admitted_total_ = 0;
    std::vector<MemoryEntry> entries_;
};

// ============================================================================
// Snapshot serialization (little-endian; layout in docs/bank_snapshot_format.md)
// ============================================================================

inline constexpr char kSnapshotMagic[8] = {'D', 'Y', 'S', 'K', 'B', 'A', 'N', 'K'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
}

template <class T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        const int c = in.get();
        require(c != std::char_traits<char>::eof(), "bank snapshot: truncated input");
        bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(c)) << (8 * i));
    }
    return std::bit_cast<T>(bits);
}

inline void put_tensor(std::ostream& out, const HeadTensor& t) {
    for (double x : t.flat()) {
        put_le(out, x);
    }
}

inline HeadTensor get_tensor(std::istream& in, std::size_t tokens, std::size_t heads, std::size_t head_dim) {
    std::vector<double> data(tokens * heads * head_dim);
    for (double& x : data) {
        x = get_le<double>(in);
    }
    return HeadTensor(tokens, heads, head_dim, std::move(data));
}

} // namespace detail

inline void MemoryBank::write_snapshot(std::ostream& out) const {
    using detail::put_le;
    const std::uint32_t layers = entries_.empty() ? 0 : static_cast<std::uint32_t>(entries_.front().kv.size());
    const std::uint32_t heads = entries_.empty() ? 0 : static_cast<std::uint32_t>(entries_.front().kv.front().keys.heads());
    const std::uint32_t head_dim =
        entries_.empty() ? 0 : static_cast<std::uint32_t>(entries_.front().kv.front().keys.head_dim());
    const std::uint32_t desc_dim = entries_.empty() ? 0 : static_cast<std::uint32_t>(entries_.front().descriptor.dim());

    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    put_le(out, kSnapshotVersion);
    put_le(out, layers);
    put_le(out, heads);
    put_le(out, head_dim);
    put_le(out, desc_dim);
    put_le(out, tau_dedup_);
    put_le(out, static_cast<std::uint64_t>(init_count_));
    put_le(out, static_cast<std::uint64_t>(cold_capacity_));
    put_le(out, static_cast<std::uint64_t>(admitted_total_));
    put_le(out, static_cast<std::uint64_t>(entries_.size()));
    for (const auto& e : entries_) {
        put_le(out, e.block_index);
        put_le(out, e.start_position);
        put_le(out, e.frames);
        put_le(out, static_cast<std::uint8_t>(e.tier));
        for (double x : e.descriptor.f.values()) {
            put_le(out, x);
        }
        for (const auto& kv : e.kv) {
            put_le(out, static_cast<std::uint32_t>(kv.tokens()));
            detail::put_tensor(out, kv.keys);
            detail::put_tensor(out, kv.values);
        }
    }
    detail::require(static_cast<bool>(out), "bank snapshot: write failed");
}

inline MemoryBank MemoryBank::read_snapshot(std::istream& in) {
    using detail::get_le;
    char magic[sizeof(kSnapshotMagic)] = {};
    in.read(magic, sizeof(magic));
    detail::require(in && std::equal(std::begin(magic), std::end(magic), std::begin(kSnapshotMagic)),
                    "bank snapshot: bad magic");
    const auto version = get_le<std::uint32_t>(in);
    detail::require(version == kSnapshotVersion, "bank snapshot: unsupported version " + std::to_string(version));
    const auto layers = get_le<std::uint32_t>(in);
    const auto heads = get_le<std::uint32_t>(in);
    const auto head_dim = get_le<std::uint32_t>(in);
    const auto desc_dim = get_le<std::uint32_t>(in);
    const auto tau = get_le<double>(in);
    const auto init_count = get_le<std::uint64_t>(in);
    const auto cold_capacity = get_le<std::uint64_t>(in);
    const auto admitted_total = get_le<std::uint64_t>(in);
    const auto count = get_le<std::uint64_t>(in);

    MemoryBank bank(tau, init_count, cold_capacity);
    for (std::uint64_t n = 0; n < count; ++n) {
        MemoryEntry e;
        e.block_index = get_le<std::uint64_t>(in);
        e.start_position = get_le<std::uint64_t>(in);
        e.frames = get_le<std::uint32_t>(in);
        const auto tier = get_le<std::uint8_t>(in);
        detail::require(tier <= 1, "bank snapshot: bad tier");
        e.tier = static_cast<Tier>(tier);
        std::vector<double> f(desc_dim);
        for (double& x : f) {
            x = get_le<double>(in);
        }
        e.descriptor = BlockDescriptor{Vec(std::move(f)), e.block_index};
        for (std::uint32_t l = 0; l < layers; ++l) {
            const auto tokens = get_le<std::uint32_t>(in);
            LayerKV kv;
            kv.layer = l;
            kv.keys = detail::get_tensor(in, tokens, heads, head_dim);
            kv.values = detail::get_tensor(in, tokens, heads, head_dim);
            e.kv.push_back(std::move(kv));
        }
        bank.validate_entry(e);
        bank.entries_.push_back(std::move(e));
    }
    bank.admitted_total_ = admitted_total;
    return bank;
}

} // namespace dysink
