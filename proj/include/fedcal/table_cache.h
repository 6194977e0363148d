// Copyright 2026 The fedcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Text serialization of coverage tables so they can be computed once per
// (m, n) and reused across calibrations.
//
// Format, one record per line, '#' starts a comment:
//
//   format-version 1
//   m 10
//   n 20
//   entry 19 5 0.90791463997151903
//
// Coverages are written with 17 significant digits and round-trip exactly.

#ifndef FEDCAL_TABLE_CACHE_H_
#define FEDCAL_TABLE_CACHE_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcal/coverage_table.h"

namespace fedcal {

inline constexpr int kTableFormatVersion = 1;

std::string SerializeTable(const CoverageTable& table);

// Parses and validates a serialized table: known directives only, a version
// no newer than kTableFormatVersion, entries in range and monotone.
absl::StatusOr<CoverageTable> ParseTable(std::string_view text);

absl::StatusOr<CoverageTable> LoadTable(const std::filesystem::path& path);

// Writes through a temporary file and a rename so readers never observe a
// partially written table.
absl::Status SaveTable(const CoverageTable& table,
                       const std::filesystem::path& path);

// <dir>/fedcal_m<m>_n<n>.table
std::filesystem::path DefaultTablePath(const std::filesystem::path& dir,
                                       const TableKey& key);

}  // namespace fedcal

#endif  // FEDCAL_TABLE_CACHE_H_
