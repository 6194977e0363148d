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
// CSV ingestion of precomputed nonconformity scores.
//
// Two layouts are accepted:
//   * one score per line, with an optional header line "score";
//   * "agent,score" rows (header required) holding several agents in one
//     file. Agents are ordered by increasing integer id.
// Blank lines are ignored. Any other malformed line is reported with its
// line number.

#ifndef FEDCAL_SCORE_IO_H_
#define FEDCAL_SCORE_IO_H_

#include <filesystem>
#include <string_view>

#include "absl/status/statusor.h"
#include "fedcal/order_stats.h"

namespace fedcal {

// Returns one agent for the single-column layout, all agents otherwise.
absl::StatusOr<ScoreMatrix> ParseScoreCsv(std::string_view text,
                                          std::string_view source = "<input>");

absl::StatusOr<ScoreMatrix> ReadScoreCsv(const std::filesystem::path& path);

}  // namespace fedcal

#endif  // FEDCAL_SCORE_IO_H_
