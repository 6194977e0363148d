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
#ifndef FEDCAL_STATUS_MACROS_H_
#define FEDCAL_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define FEDCAL_CONCAT_INNER_(a, b) a##b
#define FEDCAL_CONCAT_(a, b) FEDCAL_CONCAT_INNER_(a, b)

#define FEDCAL_RETURN_IF_ERROR(expr)                 \
  do {                                               \
    const absl::Status fedcal_status_ = (expr);      \
    if (!fedcal_status_.ok()) return fedcal_status_; \
  } while (0)

#define FEDCAL_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                                  \
  if (!tmp.ok()) return std::move(tmp).status();       \
  lhs = *std::move(tmp)

#define FEDCAL_ASSIGN_OR_RETURN(lhs, rexpr)                                 \
  FEDCAL_ASSIGN_OR_RETURN_IMPL_(FEDCAL_CONCAT_(fedcal_statusor_, __LINE__), \
                                lhs, rexpr)

#endif  // FEDCAL_STATUS_MACROS_H_
