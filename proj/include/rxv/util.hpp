// Copyright 2026 The rxv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rxv {

using Rng = std::mt19937_64;

// Whitespace tokenization; runs of spaces collapse.
std::vector<std::string> split_words(std::string_view text);

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end);
std::string join_words(const std::vector<std::string>& words);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

double uniform01(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t n);

// Derives an independent stream from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// One JSON value per non-blank line. Throws std::runtime_error naming the line
// on a parse failure.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& rows);

}  // namespace rxv
