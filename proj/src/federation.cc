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
#include "fedcal/federation.h"

#include <algorithm>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedcal/status_macros.h"

namespace fedcal {
namespace {

absl::Status ProtocolViolation(std::string_view what) {
  return absl::FailedPreconditionError(
      absl::StrCat("protocol violation: ", std::string(what)));
}

// The agent side of a round: one answer computed from local data only.
absl::StatusOr<double> AgentAnswer(int64_t agent_id, const ScoreSample& data,
                                   const Downlink& request, uint64_t seed) {
  switch (request.method) {
    case Method::kFedCpQq:
    case Method::kFedCpAvg:
      return OrderStatistic(data, request.local_ranks[agent_id]);
    case Method::kFedCp2Qq: {
      FEDCAL_ASSIGN_OR_RETURN(BinGrid grid,
                              BinGrid::FromEdges(request.bin_edges));
      Rng rng = AgentRng(seed, agent_id);
      return DpQuantile(data, request.quantile_level, request.epsilon, grid,
                        rng);
    }
    case Method::kCentralized:
      break;
  }
  return ProtocolViolation("method has no one-value agent answer");
}

}  // namespace

absl::StatusOr<std::vector<int64_t>> ResolveSizes(const FederationSpec& spec) {
  if (spec.m < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("need m >= 1 agents, got ", spec.m));
  }
  std::vector<int64_t> sizes;
  if (spec.sizes.size() == 1) {
    sizes.assign(spec.m, spec.sizes[0]);
  } else if (static_cast<int64_t>(spec.sizes.size()) == spec.m) {
    sizes = spec.sizes;
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected 1 or m = ", spec.m, " sizes, got ", spec.sizes.size()));
  }
  for (int64_t s : sizes) {
    if (s < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("agent sizes must be >= 1, got ", s));
    }
  }
  return sizes;
}

absl::Status Transcript::Send(int64_t agent_id, double payload) {
  if (agent_id < 0 || agent_id >= m_) {
    return absl::InvalidArgumentError(absl::StrCat("unknown agent ", agent_id));
  }
  if (sent_[agent_id]) {
    return ProtocolViolation(
        absl::StrCat("agent ", agent_id, " sent a second message"));
  }
  sent_[agent_id] = true;
  uplinks_.push_back({agent_id, payload});
  return absl::OkStatus();
}

absl::Status Transcript::CheckOneShot() const {
  if (static_cast<int64_t>(uplinks_.size()) != m_) {
    return ProtocolViolation(absl::StrCat(
        "expected ", m_, " uplinks, transcript holds ", uplinks_.size()));
  }
  if (!std::all_of(sent_.begin(), sent_.end(), [](bool b) { return b; })) {
    return ProtocolViolation("some agent did not answer");
  }
  return absl::OkStatus();
}

std::vector<double> Transcript::Payloads() const {
  std::vector<double> out(m_, 0.0);
  for (const Uplink& u : uplinks_) out[u.agent_id] = u.payload;
  return out;
}

absl::StatusOr<OneShotRun> RunOneShot(const FederationSpec& spec,
                                      const ScoreMatrix& scores, Method method,
                                      const OneShotOptions& options) {
  if (method == Method::kCentralized) {
    return ProtocolViolation(
        "centralized calibration requires every agent to upload all of its "
        "scores, not a single value");
  }
  FEDCAL_ASSIGN_OR_RETURN(std::vector<int64_t> sizes, ResolveSizes(spec));
  FEDCAL_RETURN_IF_ERROR(ValidateMatrix(scores, /*require_balanced=*/false));
  if (AgentSizes(scores) != sizes) {
    return absl::InvalidArgumentError(
        "score matrix does not match the federation spec sizes");
  }

  OneShotRun run;
  run.transcript = Transcript(spec.m);
  Downlink request;
  request.method = method;
  std::optional<QqPlan> qq_plan;
  std::optional<DpPlan> dp_plan;
  switch (method) {
    case Method::kFedCpQq: {
      FEDCAL_ASSIGN_OR_RETURN(qq_plan,
                              PlanFedCpQq(sizes, spec.alpha, options.table));
      request.local_ranks = qq_plan->local_ranks;
      break;
    }
    case Method::kFedCpAvg: {
      FEDCAL_ASSIGN_OR_RETURN(request.local_ranks,
                              PlanFedCpAvg(sizes, spec.alpha));
      break;
    }
    case Method::kFedCp2Qq: {
      if (!options.dp.has_value()) {
        return absl::InvalidArgumentError(
            "fedcp2-qq needs a privacy configuration");
      }
      FEDCAL_RETURN_IF_ERROR(ValidateMatrix(scores, /*require_balanced=*/true));
      FEDCAL_ASSIGN_OR_RETURN(
          dp_plan, PlanFedCp2Qq({spec.m, sizes[0]}, spec.alpha, *options.dp,
                                options.table));
      request.quantile_level = dp_plan->quantile_level;
      request.epsilon = dp_plan->effective_epsilon;
      request.bin_edges = options.dp->grid.edges();
      break;
    }
    case Method::kCentralized:
      break;
  }
  run.transcript.Broadcast(request);

  for (int64_t j = 0; j < spec.m; ++j) {
    FEDCAL_ASSIGN_OR_RETURN(
        double answer,
        AgentAnswer(j, scores[j], run.transcript.downlink(), spec.seed));
    FEDCAL_RETURN_IF_ERROR(run.transcript.Send(j, answer));
  }
  FEDCAL_RETURN_IF_ERROR(run.transcript.CheckOneShot());

  const std::vector<double> payloads = run.transcript.Payloads();
  switch (method) {
    case Method::kFedCpQq: {
      FEDCAL_ASSIGN_OR_RETURN(run.result,
                              AggregateFedCpQq(payloads, *qq_plan, spec.alpha));
      break;
    }
    case Method::kFedCpAvg: {
      FEDCAL_ASSIGN_OR_RETURN(
          run.result,
          AggregateFedCpAvg(payloads, request.local_ranks, spec.alpha));
      break;
    }
    case Method::kFedCp2Qq: {
      FEDCAL_ASSIGN_OR_RETURN(
          run.result,
          AggregateFedCp2Qq(payloads, *dp_plan, spec.alpha, *options.dp));
      break;
    }
    case Method::kCentralized:
      break;
  }
  return run;
}

}  // namespace fedcal
