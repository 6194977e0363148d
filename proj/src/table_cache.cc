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
#include "fedcal/table_cache.h"

#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "fedcal/status_macros.h"

namespace fedcal {
namespace {

absl::Status LineError(int line, absl::string_view message) {
  return absl::InvalidArgumentError(
      absl::StrCat("table line ", line, ": ", message));
}

}  // namespace

std::string SerializeTable(const CoverageTable& table) {
  std::string out = "# fedcal coverage table\n";
  absl::StrAppend(&out, "format-version ", kTableFormatVersion, "\n");
  absl::StrAppend(&out, "m ", table.key().m, "\n");
  absl::StrAppend(&out, "n ", table.key().n, "\n");
  for (const TableEntry& e : table.Entries()) {
    absl::StrAppendFormat(&out, "entry %d %d %.17g\n", e.index.l, e.index.k,
                          e.coverage);
  }
  return out;
}

absl::StatusOr<CoverageTable> ParseTable(std::string_view text_in) {
  const absl::string_view text(text_in.data(), text_in.size());
  int64_t version = -1;
  int64_t m = -1;
  int64_t n = -1;
  std::vector<TableEntry> entries;
  int line_no = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_no;
    absl::string_view line = absl::StripAsciiWhitespace(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<absl::string_view> fields =
        absl::StrSplit(line, ' ', absl::SkipEmpty());
    const absl::string_view tag = fields[0];
    if (tag == "format-version" || tag == "m" || tag == "n") {
      int64_t value = 0;
      if (fields.size() != 2 || !absl::SimpleAtoi(fields[1], &value)) {
        return LineError(line_no, absl::StrCat("malformed '", tag, "' record"));
      }
      int64_t& slot = tag == "m" ? m : (tag == "n" ? n : version);
      if (slot != -1) {
        return LineError(line_no, absl::StrCat("duplicate '", tag, "'"));
      }
      slot = value;
      if (tag == "format-version" && version > kTableFormatVersion) {
        return absl::FailedPreconditionError(absl::StrCat(
            "table format version ", version,
            " is newer than the supported version ", kTableFormatVersion));
      }
    } else if (tag == "entry") {
      TableEntry e;
      if (fields.size() != 4 || !absl::SimpleAtoi(fields[1], &e.index.l) ||
          !absl::SimpleAtoi(fields[2], &e.index.k) ||
          !absl::SimpleAtod(fields[3], &e.coverage)) {
        return LineError(line_no, "malformed entry, want 'entry l k M'");
      }
      entries.push_back(e);
    } else {
      return LineError(line_no, absl::StrCat("unknown record '", tag, "'"));
    }
  }
  if (version < 1) {
    return absl::InvalidArgumentError("table has no valid format-version");
  }
  if (m == -1 || n == -1) {
    return absl::InvalidArgumentError("table is missing m or n");
  }
  FEDCAL_ASSIGN_OR_RETURN(CoverageTable table, CoverageTable::Create({m, n}));
  for (const TableEntry& e : entries) {
    FEDCAL_RETURN_IF_ERROR(table.Insert(e.index, e.coverage));
  }
  FEDCAL_RETURN_IF_ERROR(table.CheckInvariants());
  return table;
}

absl::StatusOr<CoverageTable> LoadTable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open table file ", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto table = ParseTable(buffer.str());
  if (!table.ok()) {
    return absl::Status(
        table.status().code(),
        absl::StrCat(path.string(), ": ", table.status().message()));
  }
  return table;
}

absl::Status SaveTable(const CoverageTable& table,
                       const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      return absl::PermissionDeniedError(absl::StrCat(
          "cannot create ", path.parent_path().string(), ": ", ec.message()));
    }
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << SerializeTable(table);
    if (!out) {
      return absl::PermissionDeniedError(
          absl::StrCat("cannot write ", tmp.string()));
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot move ", tmp.string(), " to ", path.string(), ": ",
                     ec.message()));
  }
  return absl::OkStatus();
}

std::filesystem::path DefaultTablePath(const std::filesystem::path& dir,
                                       const TableKey& key) {
  return dir / absl::StrFormat("fedcal_m%d_n%d.table", key.m, key.n);
}

}  // namespace fedcal
