// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace expertmap::detail {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// Parses JSON, converting syntax errors to ParseError with the byte offset.
nlohmann::json parse_json(const std::string& text, const char* what);

}  // namespace expertmap::detail
