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
#include "cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "fedcal/conformal.h"
#include "fedcal/coverage_table.h"
#include "fedcal/federation.h"
#include "fedcal/poisson_binomial.h"
#include "fedcal/privacy.h"
#include "fedcal/score_io.h"
#include "fedcal/simulation.h"
#include "fedcal/status_macros.h"
#include "fedcal/table_cache.h"
#include "json.hpp"

namespace fedcal::cli {
namespace {

namespace fs = std::filesystem;

constexpr char kCacheDirEnv[] = "FEDCAL_CACHE_DIR";

struct Options {
  int64_t m = 0;
  int64_t n = 0;
  std::vector<int64_t> sizes;
  double alpha = 0.1;
  std::string method = "fedcp-qq";
  double epsilon = 1.0;
  int64_t bins = 100;
  double smax = 0.0;
  std::string gamma = "auto";
  double amplification = 1.0;
  uint64_t seed = 0;
  int64_t reps = 100;
  int64_t test_size = 0;
  std::string dist = "uniform";
  std::string cache;
  std::string out;
  std::vector<std::string> files;
  std::vector<double> p;
  double delta = 0.0;
};

std::string FormatScore(double v) {
  if (v == kInfiniteScore) return "+inf";
  return absl::StrFormat("%.17g", v);
}

std::optional<fs::path> CachePath(const Options& o, const TableKey& key) {
  if (!o.cache.empty()) return fs::path(o.cache);
  const char* dir = std::getenv(kCacheDirEnv);
  if (dir != nullptr && *dir != '\0') return DefaultTablePath(dir, key);
  return std::nullopt;
}

// A table for `key`, read from the cache when one exists.
struct CachedTable {
  CoverageTable table;
  std::optional<fs::path> path;
  size_t loaded_entries = 0;
  bool existed = false;
};

absl::StatusOr<CachedTable> OpenTable(const Options& o, const TableKey& key) {
  std::optional<fs::path> path = CachePath(o, key);
  if (path.has_value() && fs::exists(*path)) {
    FEDCAL_ASSIGN_OR_RETURN(CoverageTable table, LoadTable(*path));
    if (!(table.key() == key)) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "cache %s holds a table for m=%d n=%d, not m=%d n=%d", path->string(),
          table.key().m, table.key().n, key.m, key.n));
    }
    const size_t loaded = table.size();
    return CachedTable{std::move(table), path, loaded, true};
  }
  FEDCAL_ASSIGN_OR_RETURN(CoverageTable table, CoverageTable::Create(key));
  return CachedTable{std::move(table), path, 0, false};
}

// Rewrites the cache only when new entries were computed, so reruns leave
// the file untouched.
absl::StatusOr<std::string> SyncTable(const CachedTable& cached) {
  if (!cached.path.has_value()) return std::string("no cache");
  if (cached.existed && cached.table.size() == cached.loaded_entries) {
    return absl::StrCat("reused ", cached.path->string());
  }
  FEDCAL_RETURN_IF_ERROR(SaveTable(cached.table, *cached.path));
  return absl::StrCat("wrote ", cached.path->string());
}

absl::Status WriteFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) {
    return absl::PermissionDeniedError(absl::StrCat("cannot write ", path));
  }
  return absl::OkStatus();
}

absl::StatusOr<DpConfig> MakeDpConfig(const Options& o, double default_smax) {
  DpConfig cfg;
  cfg.epsilon = o.epsilon;
  cfg.amplification = o.amplification;
  const double smax = o.smax > 0.0 ? o.smax : default_smax;
  if (!(smax > 0.0)) {
    return absl::InvalidArgumentError(
        "fedcp2-qq needs an a-priori score bound --smax; deriving it from the "
        "calibration data leaks information");
  }
  FEDCAL_ASSIGN_OR_RETURN(cfg.grid, BinGrid::Uniform(o.bins, smax));
  if (o.gamma != "auto") {
    double gamma = 0.0;
    if (!absl::SimpleAtod(o.gamma, &gamma)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "--gamma must be a number or 'auto', got '", o.gamma, "'"));
    }
    cfg.gamma = gamma;
  }
  return cfg;
}

absl::Status CmdTable(const Options& o, std::ostream& out) {
  const TableKey key{o.m, o.n};
  FEDCAL_RETURN_IF_ERROR(ValidateKey(key));
  FEDCAL_ASSIGN_OR_RETURN(CachedTable cached, OpenTable(o, key));
  FEDCAL_ASSIGN_OR_RETURN(LkSelection sel, cached.table.Select(o.alpha));
  FEDCAL_RETURN_IF_ERROR(cached.table.CheckInvariants());
  FEDCAL_ASSIGN_OR_RETURN(std::string cache_note, SyncTable(cached));
  out << absl::StrFormat("l*=%d k*=%d M=%.12f\n", sel.index.l, sel.index.k,
                         sel.coverage);
  out << "cache: " << cache_note << "\n";
  return absl::OkStatus();
}

nlohmann::json ResultJson(const CalibrationResult& r,
                          const std::vector<int64_t>& sizes) {
  nlohmann::json j;
  j["method"] = std::string(MethodName(r.method));
  j["alpha"] = r.params.alpha;
  if (r.q_hat == kInfiniteScore) {
    j["q_hat"] = "+inf";
  } else {
    j["q_hat"] = r.q_hat;
  }
  j["guaranteed_coverage"] = r.guaranteed_coverage.has_value()
                                 ? nlohmann::json(*r.guaranteed_coverage)
                                 : nlohmann::json(nullptr);
  j["agents"] = sizes.size();
  j["sizes"] = sizes;
  if (r.method != Method::kCentralized) {
    j["l"] = r.params.l;
    j["local_ranks"] = r.params.local_ranks;
  } else {
    j["rank"] = r.params.l;
  }
  if (r.method == Method::kFedCpQq || r.method == Method::kFedCp2Qq) {
    j["k"] = r.params.k;
  }
  if (r.method == Method::kFedCp2Qq) {
    j["epsilon"] = r.params.epsilon;
    j["effective_epsilon"] = r.params.effective_epsilon;
    j["bins"] = r.params.bins;
    j["smax"] = r.params.smax;
    j["gamma"] = r.params.gamma;
    j["l_cor"] = r.params.l_cor;
    j["quantile_level"] = r.params.quantile_level;
  }
  return j;
}

absl::Status CmdCalibrate(const Options& o, std::ostream& out) {
  if (o.files.empty()) {
    return absl::InvalidArgumentError("no score files given");
  }
  FEDCAL_ASSIGN_OR_RETURN(Method method, ParseMethod(o.method));
  ScoreMatrix scores;
  for (const std::string& f : o.files) {
    FEDCAL_ASSIGN_OR_RETURN(ScoreMatrix part, ReadScoreCsv(f));
    for (ScoreSample& s : part) scores.push_back(std::move(s));
  }
  const std::vector<int64_t> sizes = AgentSizes(scores);
  const bool balanced = std::all_of(sizes.begin(), sizes.end(),
                                    [&](int64_t s) { return s == sizes[0]; });
  const TableKey key{static_cast<int64_t>(sizes.size()), sizes[0]};

  CalibrationResult result;
  std::string cache_note;
  switch (method) {
    case Method::kCentralized: {
      ScoreSample pooled;
      for (const ScoreSample& s : scores) {
        pooled.insert(pooled.end(), s.begin(), s.end());
      }
      FEDCAL_ASSIGN_OR_RETURN(result, SplitCpCalibrate(pooled, o.alpha));
      break;
    }
    case Method::kFedCpAvg: {
      FEDCAL_ASSIGN_OR_RETURN(result, FedCpAvgCalibrate(scores, o.alpha));
      break;
    }
    case Method::kFedCpQq: {
      if (!balanced) {
        FEDCAL_ASSIGN_OR_RETURN(result, FedCpQqCalibrate(scores, o.alpha));
        break;
      }
      FEDCAL_ASSIGN_OR_RETURN(CachedTable cached, OpenTable(o, key));
      FEDCAL_ASSIGN_OR_RETURN(result,
                              FedCpQqCalibrate(scores, o.alpha, &cached.table));
      FEDCAL_ASSIGN_OR_RETURN(cache_note, SyncTable(cached));
      break;
    }
    case Method::kFedCp2Qq: {
      if (!balanced) {
        return absl::InvalidArgumentError(
            "fedcp2-qq needs agents of equal size");
      }
      FEDCAL_ASSIGN_OR_RETURN(DpConfig dp, MakeDpConfig(o, 0.0));
      FEDCAL_ASSIGN_OR_RETURN(CachedTable cached, OpenTable(o, key));
      FEDCAL_ASSIGN_OR_RETURN(result, FedCp2QqCalibrate(scores, o.alpha, dp,
                                                        o.seed, &cached.table));
      FEDCAL_ASSIGN_OR_RETURN(cache_note, SyncTable(cached));
      break;
    }
  }
  if (!o.out.empty()) {
    FEDCAL_RETURN_IF_ERROR(
        WriteFile(o.out, ResultJson(result, sizes).dump(2) + "\n"));
  }
  out << "method=" << MethodName(result.method) << " agents=" << sizes.size()
      << "\n";
  if (result.method == Method::kCentralized) {
    out << "rank=" << result.params.l << "\n";
  } else if (result.method == Method::kFedCpAvg) {
    out << "local ranks=" << absl::StrJoin(result.params.local_ranks, ",")
        << "\n";
  } else if (result.params.l > 0) {
    out << "l=" << result.params.l << " k=" << result.params.k << "\n";
  } else {
    out << "local ranks=" << absl::StrJoin(result.params.local_ranks, ",")
        << " k=" << result.params.k << "\n";
  }
  if (result.method == Method::kFedCp2Qq) {
    out << absl::StrFormat("gamma=%.6g l_cor=%d q=%.6f\n", result.params.gamma,
                           result.params.l_cor, result.params.quantile_level);
  }
  out << "q_hat=" << FormatScore(result.q_hat) << "\n";
  if (result.guaranteed_coverage.has_value()) {
    out << absl::StrFormat("guaranteed coverage=%.12f\n",
                           *result.guaranteed_coverage);
  } else {
    out << "guaranteed coverage=none\n";
  }
  if (!cache_note.empty()) out << "cache: " << cache_note << "\n";
  return absl::OkStatus();
}

absl::StatusOr<ScoreDistribution> ParseDistribution(const std::string& name) {
  if (name == "uniform") return ScoreDistribution::Uniform();
  if (name == "exponential") return ScoreDistribution::Exponential();
  if (name == "contaminated") return ScoreDistribution::Contaminated();
  return absl::InvalidArgumentError(
      absl::StrCat("unknown distribution '", name,
                   "'; expected uniform, exponential or contaminated"));
}

absl::Status CmdSimulate(const Options& o, std::ostream& out) {
  ExperimentConfig cfg;
  FEDCAL_ASSIGN_OR_RETURN(cfg.method, ParseMethod(o.method));
  FEDCAL_ASSIGN_OR_RETURN(cfg.distribution, ParseDistribution(o.dist));
  cfg.spec.alpha = o.alpha;
  cfg.spec.seed = o.seed;
  if (!o.sizes.empty()) {
    if (o.m != 0 && o.m != static_cast<int64_t>(o.sizes.size())) {
      return absl::InvalidArgumentError(
          absl::StrCat("--m=", o.m, " disagrees with the ", o.sizes.size(),
                       " entries of --sizes"));
    }
    cfg.spec.m = static_cast<int64_t>(o.sizes.size());
    cfg.spec.sizes = o.sizes;
  } else {
    if (o.m < 1 || o.n < 1) {
      return absl::InvalidArgumentError("give --m and --n, or --sizes");
    }
    cfg.spec.m = o.m;
    cfg.spec.sizes = {o.n};
  }
  cfg.replications = o.reps;
  cfg.test_size = o.test_size;
  if (cfg.method == Method::kFedCp2Qq) {
    FEDCAL_ASSIGN_OR_RETURN(cfg.dp,
                            MakeDpConfig(o, o.dist == "uniform" ? 1.0 : 0.0));
  }
  FEDCAL_ASSIGN_OR_RETURN(ExperimentSummary summary, CoverageExperiment(cfg));
  if (!o.out.empty()) {
    std::string csv = "method,coverage,mean_length,seed\n";
    for (const ReplicationRow& row : summary.rows) {
      absl::StrAppend(&csv, std::string(MethodName(row.method)), ",",
                      absl::StrFormat("%.17g", row.coverage), ",",
                      FormatScore(row.mean_length), ",", row.seed, "\n");
    }
    FEDCAL_RETURN_IF_ERROR(WriteFile(o.out, csv));
  }
  out << absl::StrFormat(
      "method=%s reps=%d mean_coverage=%.6f se=%.6f mean_length=%s "
      "infinite=%d\n",
      std::string(MethodName(cfg.method)), cfg.replications,
      summary.mean_coverage, summary.coverage_se,
      FormatScore(summary.mean_length), summary.infinite_count);
  return absl::OkStatus();
}

absl::Status CmdDiagnose(const Options& o, std::ostream& out) {
  bool did_something = false;
  if (!o.p.empty()) {
    FEDCAL_ASSIGN_OR_RETURN(PoissonBinomialDiagnostic d,
                            DiagnosePoissonBinomial(o.p));
    out << absl::StrFormat(
        "mean_p=%.12f exact_tv=%.12g ehm_lower/C=%.12g ehm_upper=%.12g\n",
        d.mean_p, d.exact_tv_to_binomial, d.ehm_lower, d.ehm_upper);
    did_something = true;
  }
  if (o.delta > 0.0) {
    const TableKey key{o.m, o.n};
    FEDCAL_ASSIGN_OR_RETURN(double bound,
                            ConditionalBound(key, o.alpha, o.delta));
    out << absl::StrFormat("conditional miscoverage bound=%.12f\n", bound);
    did_something = true;
  }
  if (!did_something) {
    return absl::InvalidArgumentError(
        "nothing to diagnose: give --p and/or --delta with --m and --n");
  }
  return absl::OkStatus();
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Federated conformal calibration"};
  app.name("fedcal");
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI file; [table], [calibrate], [simulate] or [diagnose] "
                 "sections hold flag=value pairs. Flags win over the file.");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Options o;
  auto add_alpha = [&](CLI::App* sub) {
    sub->add_option("--alpha", o.alpha, "Miscoverage level in (0, 1)")
        ->capture_default_str();
  };
  auto add_dp = [&](CLI::App* sub) {
    sub->add_option("--epsilon", o.epsilon, "Per-agent privacy budget")
        ->capture_default_str();
    sub->add_option("--bins", o.bins, "Number of bins B")
        ->capture_default_str();
    sub->add_option("--smax", o.smax, "Upper bound S_max on the scores");
    sub->add_option("--gamma", o.gamma, "Mixing parameter or 'auto'")
        ->capture_default_str();
    sub->add_option("--amplification", o.amplification,
                    "Effective-epsilon multiplier for amplification")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  };

  CLI::App* table = app.add_subcommand(
      "table", "Build or reuse the coverage table and print (l*, k*, M)");
  table->add_option("--m", o.m, "Number of agents")->required();
  table->add_option("--n", o.n, "Scores per agent")->required();
  add_alpha(table);
  table->add_option("--cache", o.cache,
                    absl::StrCat("Cache file (default: $", kCacheDirEnv,
                                 "/fedcal_m<m>_n<n>.table)"));

  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Calibrate a threshold from per-agent score files");
  calibrate->add_option("files", o.files, "Score CSV files")->required();
  add_alpha(calibrate);
  calibrate
      ->add_option("--method", o.method,
                   "centralized, fedcp-qq, fedcp-avg or fedcp2-qq")
      ->capture_default_str();
  add_dp(calibrate);
  calibrate->add_option("--cache", o.cache, "Coverage table cache file");
  calibrate->add_option("--out", o.out, "Write the result as JSON here");

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte-Carlo coverage experiment on synthetic scores");
  simulate->add_option("--m", o.m, "Number of agents");
  simulate->add_option("--n", o.n, "Scores per agent");
  simulate->add_option("--sizes", o.sizes, "Per-agent sizes, comma separated")
      ->delimiter(',');
  add_alpha(simulate);
  simulate
      ->add_option("--method", o.method,
                   "centralized, fedcp-qq, fedcp-avg or fedcp2-qq")
      ->capture_default_str();
  add_dp(simulate);
  simulate->add_option("--reps", o.reps, "Replications")->capture_default_str();
  simulate->add_option("--dist", o.dist, "uniform, exponential or contaminated")
      ->capture_default_str();
  simulate
      ->add_option("--test-size", o.test_size,
                   "Test scores per replication (0: exact coverage)")
      ->capture_default_str();
  simulate->add_option("--out", o.out, "Write per-replication CSV here");

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "Heterogeneity and conditional-coverage diagnostics");
  diagnose->add_option("--p", o.p, "Per-agent probabilities, comma separated")
      ->delimiter(',');
  diagnose->add_option("--m", o.m, "Number of agents");
  diagnose->add_option("--n", o.n, "Scores per agent");
  add_alpha(diagnose);
  diagnose->add_option("--delta", o.delta, "Confidence parameter in (0, 0.5]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  absl::Status status;
  if (table->parsed()) {
    status = CmdTable(o, out);
  } else if (calibrate->parsed()) {
    status = CmdCalibrate(o, out);
  } else if (simulate->parsed()) {
    status = CmdSimulate(o, out);
  } else {
    status = CmdDiagnose(o, out);
  }
  if (!status.ok()) {
    err << "error: " << status.message() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fedcal::cli
