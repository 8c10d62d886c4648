// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dysink {

/// Thrown on any contract violation (shape mismatch, invalid config, bad index, ...).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const char* message) {
    if (!condition) {
        throw Error(message);
    }
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(message);
    }
}

} // namespace detail
} // namespace dysink
