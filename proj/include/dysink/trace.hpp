// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "dysink/error.hpp"
#include "dysink/rollout.hpp"

namespace dysink {

// Line-delimited JSON, one object per step. Field order is frozen; see docs/trace_format.md.

namespace detail {

inline void append_real(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
}

inline void append_hex(std::string& out, std::uint64_t x) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "\"%016llx\"", static_cast<unsigned long long>(x));
    out += buf;
}

} // namespace detail

inline std::string to_trace_line(const StepRecord& r) {
    std::string out;
    out.reserve(512);
    out += "{\"block_index\":" + std::to_string(r.block_index);
    out += ",\"scene\":" + std::to_string(r.label.scene);
    out += ",\"epoch\":" + std::to_string(r.label.epoch);
    out += ",\"retrieved\":[";
    for (std::size_t i = 0; i < r.retrieved.size(); ++i) {
        out += i ? ",[" : "[";
        out += std::to_string(r.retrieved[i].block_index) + ",";
        detail::append_real(out, r.retrieved[i].score);
        out += "]";
    }
    out += "],\"anchors\":[";
    for (std::size_t i = 0; i < r.anchors.size(); ++i) {
        out += (i ? "," : "") + std::to_string(r.anchors[i]);
    }
    out += "],\"layers\":[";
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
        const LayerRecord& l = r.layers[i];
        out += i ? ",{" : "{";
        out += "\"layer\":" + std::to_string(l.layer) + ",\"rho\":[";
        for (std::size_t e = 0; e < l.rho.size(); ++e) {
            if (e) {
                out += ",";
            }
            detail::append_real(out, l.rho[e]);
        }
        out += "],\"g\":";
        out += l.g ? "1" : "0";
        out += ",\"context_tokens\":" + std::to_string(l.context_tokens) + ",\"checksum\":";
        detail::append_hex(out, l.checksum);
        out += "}";
    }
    out += "],\"gate_rate\":";
    if (r.gate_rate) {
        detail::append_real(out, *r.gate_rate);
    } else {
        out += "null";
    }
    out += ",\"hot_footprint\":" + std::to_string(r.hot_footprint);
    out += ",\"bank_size\":" + std::to_string(r.bank_size);
    out += ",\"admitted\":";
    out += r.admitted ? "true" : "false";
    out += ",\"attention_output_checksum\":";
    detail::append_hex(out, r.attention_output_checksum);
    out += "}";
    return out;
}

inline void write_trace(std::ostream& out, const std::vector<StepRecord>& trace) {
    for (const auto& r : trace) {
        out << to_trace_line(r) << '\n';
    }
    detail::require(static_cast<bool>(out), "trace: write failed");
}

inline void write_trace_file(const std::string& path, const std::vector<StepRecord>& trace) {
    std::ofstream out(path, std::ios::binary);
    detail::require(static_cast<bool>(out), "trace: cannot open " + path);
    write_trace(out, trace);
}

} // namespace dysink
