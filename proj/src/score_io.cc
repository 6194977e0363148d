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
#include "fedcal/score_io.h"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace fedcal {
namespace {

absl::Status LineError(absl::string_view source, int line,
                       absl::string_view message) {
  return absl::InvalidArgumentError(
      absl::StrCat(source, ":", line, ": ", message));
}

bool ParseScore(absl::string_view field, double* out) {
  return absl::SimpleAtod(absl::StripAsciiWhitespace(field), out) &&
         std::isfinite(*out);
}

}  // namespace

absl::StatusOr<ScoreMatrix> ParseScoreCsv(std::string_view text_in,
                                          std::string_view source_in) {
  const absl::string_view text(text_in.data(), text_in.size());
  const absl::string_view source(source_in.data(), source_in.size());
  enum class Layout { kUnknown, kSingle, kAgent };
  Layout layout = Layout::kUnknown;
  ScoreSample single;
  std::map<int64_t, ScoreSample> agents;
  int line_no = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_no;
    const absl::string_view line = absl::StripAsciiWhitespace(raw);
    if (line.empty()) continue;
    std::vector<absl::string_view> fields = absl::StrSplit(line, ',');
    for (absl::string_view& f : fields) f = absl::StripAsciiWhitespace(f);
    if (layout == Layout::kUnknown) {
      layout = Layout::kSingle;
      if (fields.size() == 2 && absl::AsciiStrToLower(fields[0]) == "agent" &&
          absl::AsciiStrToLower(fields[1]) == "score") {
        layout = Layout::kAgent;
        continue;
      }
      if (fields.size() == 1 && absl::AsciiStrToLower(fields[0]) == "score") {
        continue;
      }
    }
    if (layout == Layout::kSingle) {
      double value = 0.0;
      if (fields.size() != 1 || !ParseScore(fields[0], &value)) {
        return LineError(
            source, line_no,
            absl::StrCat("expected one finite score, got '", line, "'"));
      }
      single.push_back(value);
    } else {
      int64_t agent = 0;
      double value = 0.0;
      if (fields.size() != 2 || !absl::SimpleAtoi(fields[0], &agent) ||
          !ParseScore(fields[1], &value)) {
        return LineError(source, line_no,
                         absl::StrCat("expected 'agent,score' with an integer "
                                      "agent and a finite score, got '",
                                      line, "'"));
      }
      agents[agent].push_back(value);
    }
  }
  ScoreMatrix out;
  if (layout == Layout::kAgent) {
    for (auto& [id, sample] : agents) out.push_back(std::move(sample));
  } else if (!single.empty()) {
    out.push_back(std::move(single));
  }
  if (out.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(source, ": no scores found"));
  }
  return out;
}

absl::StatusOr<ScoreMatrix> ReadScoreCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open score file ", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseScoreCsv(buffer.str(), path.string());
}

}  // namespace fedcal
