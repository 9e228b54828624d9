#ifndef FEDSIM_SUMMARY_H_
#define FEDSIM_SUMMARY_H_

#include <optional>
#include <vector>

#include "fedsim/orchestrator.h"

namespace fedsim {

struct BestRound {
  int round = 0;
  double value = 0.0;
};

struct ClientBest {
  int client_id = 0;
  BestRound loss;      // lowest
  BestRound accuracy;  // highest
};

struct RunSummary {
  int rounds = 0;
  MetricSet final_metrics;
  BestRound best_loss;
  BestRound best_accuracy;
  std::optional<BestRound> best_auc;
  std::vector<ClientBest> clients;  // ascending id
  // Means over clients of each client's best test loss / accuracy.
  std::optional<double> mean_client_best_loss;
  std::optional<double> mean_client_best_accuracy;
  double total_sim_time = 0.0;
};

// Best round per global metric, ties going to the earlier round. Throws
// InvalidArgument on an empty report.
RunSummary Summarize(const RunReport& report);

// Simulated seconds spent in rounds 1..round.
double SimTimeThrough(const RunReport& report, int round);

}  // namespace fedsim

#endif  // FEDSIM_SUMMARY_H_
