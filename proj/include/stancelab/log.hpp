// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <functional>
#include <string>

namespace stancelab {

using WarningSink = std::function<void(const std::string&)>;

// Receives non-fatal diagnostics (duplicate lexicon rows, clamped probabilities,
// zero-norm vectors). Defaults to stderr.
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace stancelab
