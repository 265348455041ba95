#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

namespace forklab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace forklab
