// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include "io_util.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "expertmap/error.hpp"
#include "expertmap/parallel.hpp"

namespace expertmap {

namespace detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
  if (!out) throw Error("failed writing " + path.string());
}

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(what) + " JSON at byte " + std::to_string(e.byte) +
                     ": " + e.what());
  }
}

}  // namespace detail

std::size_t threads_from_env() {
  const char* value = std::getenv("GEM_THREADS");
  if (value == nullptr || *value == '\0') return 0;
  char* end = nullptr;
  const unsigned long parsed = std::strtoul(value, &end, 10);
  if (end == value || *end != '\0') {
    throw ValidationError(std::string("GEM_THREADS is not a count: ") + value);
  }
  return static_cast<std::size_t>(parsed);
}

}  // namespace expertmap
