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
// One-shot protocol simulator. The server broadcasts its request, every agent
// answers with a single real number, and the server aggregates. Every
// message goes through a Transcript so the single-round property can be
// audited after the fact.

#ifndef FEDCAL_FEDERATION_H_
#define FEDCAL_FEDERATION_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedcal/conformal.h"
#include "fedcal/coverage_table.h"
#include "fedcal/order_stats.h"
#include "fedcal/privacy.h"

namespace fedcal {

struct FederationSpec {
  int64_t m = 1;
  // Either one size shared by all agents or exactly m sizes.
  std::vector<int64_t> sizes{1};
  double alpha = 0.1;
  uint64_t seed = 0;
};

// Per-agent sizes, expanding a single shared size to m entries.
absl::StatusOr<std::vector<int64_t>> ResolveSizes(const FederationSpec& spec);

// What the server broadcasts before the round.
struct Downlink {
  Method method = Method::kFedCpQq;
  // Rank requested from each agent (FedCP-QQ and FedCP-Avg).
  std::vector<int64_t> local_ranks;
  // Private variant: mechanism level, budget and bin edges.
  double quantile_level = 0.0;
  double epsilon = 0.0;
  std::vector<double> bin_edges;
};

struct Uplink {
  int64_t agent_id = 0;
  double payload = 0.0;
};

class Transcript {
 public:
  explicit Transcript(int64_t m) : m_(m), sent_(m, false) {}

  void Broadcast(Downlink downlink) { downlink_ = std::move(downlink); }

  // Records the single message of `agent_id`. A second message from the same
  // agent is a protocol violation (FailedPrecondition).
  absl::Status Send(int64_t agent_id, double payload);

  // Exactly one uplink per agent.
  absl::Status CheckOneShot() const;

  int64_t m() const { return m_; }
  const Downlink& downlink() const { return downlink_; }
  const std::vector<Uplink>& uplinks() const { return uplinks_; }

  // Payloads ordered by agent id.
  std::vector<double> Payloads() const;

 private:
  int64_t m_;
  Downlink downlink_;
  std::vector<Uplink> uplinks_;
  std::vector<bool> sent_;
};

struct OneShotOptions {
  // Required for Method::kFedCp2Qq.
  std::optional<DpConfig> dp;
  // Optional precomputed table for (m, n); must match the data.
  CoverageTable* table = nullptr;
};

struct OneShotRun {
  CalibrationResult result;
  Transcript transcript{0};
};

// Runs one calibration round. The result is identical to calling the
// method's calibrator directly (FedCP2-QQ with seed spec.seed). Centralized
// calibration needs every raw score at the server and is refused as a
// protocol violation.
absl::StatusOr<OneShotRun> RunOneShot(const FederationSpec& spec,
                                      const ScoreMatrix& scores, Method method,
                                      const OneShotOptions& options = {});

}  // namespace fedcal

#endif  // FEDCAL_FEDERATION_H_
