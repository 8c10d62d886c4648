// Copyright (c) 2026 The DySink-Sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dysink/anomaly_gate.hpp"
#include "dysink/compare.hpp"
#include "dysink/config.hpp"
#include "dysink/descriptor.hpp"
#include "dysink/error.hpp"
#include "dysink/memory_bank.hpp"
#include "dysink/retrieval.hpp"
#include "dysink/rollout.hpp"
#include "dysink/scenario.hpp"
#include "dysink/tensor.hpp"
#include "dysink/trace.hpp"
