// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "dysink/error.hpp"

namespace dysink {

enum class PolicyKind : std::uint8_t { WindowOnly, StaticSink, DySink };
enum class Scenario : std::uint8_t { Drift, Revisit, Adversarial };
enum class GateAffinity : std::uint8_t { PostRope, PreRope };

struct Policy {
    PolicyKind kind = PolicyKind::DySink;
    std::size_t sink_frames = 6; // StaticSink only

    static Policy window_only() { return {PolicyKind::WindowOnly, 0}; }
    static Policy static_sink(std::size_t frames) { return {PolicyKind::StaticSink, frames}; }
    static Policy dysink() { return {PolicyKind::DySink, 0}; }

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// All scalar knobs of a rollout. Defaults for L, W, k and both thresholds are the published settings.
struct RolloutConfig {
    std::size_t L = 3;                // latent frames per block
    std::size_t W = 3;                // sliding window, in blocks
    std::size_t k = 2;                // retrieved blocks
    double tau_dedup = 0.98;
    double tau_gate = 0.5;
    std::size_t H = 8;
    std::size_t head_dim = 16;
    std::size_t d = 64;               // descriptor dimension
    std::size_t n_layers = 4;
    std::size_t tokens_per_frame = 2;
    double rope_base = 10000.0;
    std::uint64_t seed = 0;
    Policy policy = Policy::dysink();
    std::size_t total_blocks = 200;
    Scenario scenario = Scenario::Drift;

    std::size_t latent_dim = 16;      // per-token latent width
    std::size_t init_count = 0;       // 0 means "use W"
    std::size_t cold_capacity = 0;    // 0 disables eviction of offloaded entries
    GateAffinity gate_affinity = GateAffinity::PostRope;

    std::size_t block_tokens() const noexcept { return L * tokens_per_frame; }
    std::size_t effective_init_count() const noexcept { return init_count == 0 ? W : init_count; }

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            detail::require(v > 0, std::string("config: ") + name + " must be positive");
        };
        positive(L, "L");
        positive(W, "W");
        positive(k, "k");
        positive(H, "H");
        positive(n_layers, "n_layers");
        positive(tokens_per_frame, "tokens_per_frame");
        detail::require(head_dim >= 2 && head_dim % 2 == 0, "config: head_dim must be even and >= 2");
        detail::require(d >= 2, "config: d must be >= 2");
        detail::require(latent_dim >= 2, "config: latent_dim must be >= 2");
        detail::require(tau_dedup > 0.0 && tau_dedup <= 1.0, "config: tau_dedup must lie in (0, 1]");
        detail::require(tau_gate > 0.0 && tau_gate < 1.0, "config: tau_gate must lie in (0, 1)");
        detail::require(rope_base > 1.0, "config: rope_base must be > 1");
        if (policy.kind == PolicyKind::StaticSink) {
            positive(policy.sink_frames, "static sink frame count");
        }
    }
};

// ============================================================================
// Text forms
// ============================================================================

inline std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::Drift: return "drift";
    case Scenario::Revisit: return "revisit";
    case Scenario::Adversarial: return "adversarial";
    }
    return "?";
}

inline std::string to_string(const Policy& p) {
    switch (p.kind) {
    case PolicyKind::WindowOnly: return "window";
    case PolicyKind::StaticSink: return "static:" + std::to_string(p.sink_frames);
    case PolicyKind::DySink: return "dysink";
    }
    return "?";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    require(ec == std::errc() && ptr == end, "config: bad value for '" + std::string(key) + "': " + std::string(text));
    return value;
}

} // namespace detail

inline Scenario parse_scenario(std::string_view text) {
    if (text == "drift") return Scenario::Drift;
    if (text == "revisit") return Scenario::Revisit;
    if (text == "adversarial") return Scenario::Adversarial;
    throw Error("config: unknown scenario '" + std::string(text) + "'");
}

/// "window", "dysink", "static" (default sink size) or "static:<S>".
inline Policy parse_policy(std::string_view text, std::size_t default_sink_frames = 6) {
    if (text == "window") return Policy::window_only();
    if (text == "dysink") return Policy::dysink();
    if (text == "static") return Policy::static_sink(default_sink_frames);
    if (text.rfind("static:", 0) == 0) {
        return Policy::static_sink(detail::parse_number<std::size_t>("policy", text.substr(7)));
    }
    throw Error("config: unknown policy '" + std::string(text) + "'");
}

inline GateAffinity parse_gate_affinity(std::string_view text) {
    if (text == "post_rope") return GateAffinity::PostRope;
    if (text == "pre_rope") return GateAffinity::PreRope;
    throw Error("config: unknown gate_affinity '" + std::string(text) + "'");
}

/// Applies one `key = value` assignment; unknown keys throw.
inline void apply_config_value(RolloutConfig& cfg, std::string_view key, std::string_view value) {
    using detail::parse_number;
    if (key == "L") cfg.L = parse_number<std::size_t>(key, value);
    else if (key == "W") cfg.W = parse_number<std::size_t>(key, value);
    else if (key == "k") cfg.k = parse_number<std::size_t>(key, value);
    else if (key == "tau_dedup") cfg.tau_dedup = parse_number<double>(key, value);
    else if (key == "tau_gate") cfg.tau_gate = parse_number<double>(key, value);
    else if (key == "H") cfg.H = parse_number<std::size_t>(key, value);
    else if (key == "head_dim") cfg.head_dim = parse_number<std::size_t>(key, value);
    else if (key == "d") cfg.d = parse_number<std::size_t>(key, value);
    else if (key == "n_layers") cfg.n_layers = parse_number<std::size_t>(key, value);
    else if (key == "tokens_per_frame") cfg.tokens_per_frame = parse_number<std::size_t>(key, value);
    else if (key == "rope_base") cfg.rope_base = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "policy") cfg.policy = parse_policy(value);
    else if (key == "total_blocks") cfg.total_blocks = parse_number<std::size_t>(key, value);
    else if (key == "scenario") cfg.scenario = parse_scenario(value);
    else if (key == "latent_dim") cfg.latent_dim = parse_number<std::size_t>(key, value);
    else if (key == "init_count") cfg.init_count = parse_number<std::size_t>(key, value);
    else if (key == "cold_capacity") cfg.cold_capacity = parse_number<std::size_t>(key, value);
    else if (key == "gate_affinity") cfg.gate_affinity = parse_gate_affinity(value);
    else throw Error("config: unknown key '" + std::string(key) + "'");
}

/// Flat `key = value` lines; '#' starts a comment; a key may appear once.
inline RolloutConfig parse_config(std::istream& in) {
    RolloutConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = detail::trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        detail::require(eq != std::string_view::npos,
                        "config: line " + std::to_string(line_no) + " is not a key = value pair");
        const auto key = detail::trim(view.substr(0, eq));
        const auto value = detail::trim(view.substr(eq + 1));
        detail::require(!key.empty() && !value.empty(), "config: line " + std::to_string(line_no) + " is incomplete");
        detail::require(seen.emplace(key).second, "config: duplicate key '" + std::string(key) + "'");
        apply_config_value(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

inline RolloutConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RolloutConfig load_config(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), "config: cannot open " + path);
    return parse_config(in);
}

} // namespace dysink
