// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cdlab {

/// Training aborted because a loss or parameter became non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::int64_t step)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

/// Checkpoint file is malformed, truncated, or carries the wrong magic.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration file failed to parse or validate; `path` names the key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& message)
        : std::runtime_error(key_path.empty() ? message : key_path + ": " + message),
          key_path_(key_path) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

} // namespace cdlab
