#ifndef FEDSIM_REPORT_H_
#define FEDSIM_REPORT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/config.h"
#include "fedsim/orchestrator.h"
#include "fedsim/summary.h"

namespace fedsim {

// Shortest round-trip decimal, always with a fractional part ("401.0").
std::string FormatSeconds(double seconds);

// One row per completed round.
std::string RoundsCsv(const RunReport& report);
// One row per (round, client) evaluation on the client's own test split.
std::string ClientMetricsCsv(const RunReport& report);
nlohmann::json SummaryJson(const RunConfig& config, const PreparedRun& prepared,
                           const RunReport& report);

// rounds.csv, client_metrics.csv and roc_round{r}.csv (csv format),
// summary.json (json format) and events.log into `dir`.
void WriteRunFiles(const std::filesystem::path& dir, const RunConfig& config,
                   const PreparedRun& prepared, const RunReport& report);

enum class SweepVariable { kClientCount, kRounds, kPolicy };
std::string_view ToString(SweepVariable v);
SweepVariable ParseSweepVariable(std::string_view name);

// Accepts "1A", "2B", ... or "<departure>/<delay>" with the long names.
PolicyConfig ParsePolicyCode(std::string_view code, PolicyConfig base);
std::string PolicyCode(const PolicyConfig& p);

// Base config with the swept variable set to `value` and the matching entry
// of sweep_overrides merged in.
RunConfig ConfigForSweepValue(const RunConfig& base, SweepVariable var,
                              const std::string& value);

struct SweepRow {
  std::string value;
  std::string selection;  // final, best_loss, best_accuracy, best_auc
  int round = 0;
  MetricSet metrics;
  double sim_time = 0.0;  // through `round`
  std::optional<double> centralized_time;

  std::optional<double> TimeReduction() const;  // 1 - sim/centralized
};

struct SweepRun {
  std::string value;
  RunConfig config;
  PreparedRun prepared;
  RunReport report;
};

// Rows for one finished run: the final round plus the best round per metric.
std::vector<SweepRow> ComparisonRows(const std::string& value,
                                     const PreparedRun& prepared,
                                     const RunReport& report);

std::string ComparisonCsv(SweepVariable var, const std::vector<SweepRow>& rows);
// Final-round global metrics and mean per-client test metrics per policy.
std::string PolicyAveragesCsv(const std::vector<SweepRun>& runs);

// Runs every value, each into `out_dir/<variable>_<value>`, then writes
// comparison.csv (and policy_averages.csv for policy sweeps). Throws
// InvalidArgument on an empty value list.
std::vector<SweepRun> RunSweep(const RunConfig& base, SweepVariable var,
                               const std::vector<std::string>& values,
                               const std::filesystem::path& out_dir);

}  // namespace fedsim

#endif  // FEDSIM_REPORT_H_
