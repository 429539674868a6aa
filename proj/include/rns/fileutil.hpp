// Copyright 2026 The relightnav Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

namespace rns {

// Throws InputError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it over `path`, so a failed
// write never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace rns
