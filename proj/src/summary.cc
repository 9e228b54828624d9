#include "fedsim/summary.h"

#include <map>

#include "fedsim/error.h"

namespace fedsim {

namespace {

void KeepLower(BestRound& best, int round, double v) {
  if (v < best.value) best = {round, v};
}

void KeepHigher(BestRound& best, int round, double v) {
  if (v > best.value) best = {round, v};
}

}  // namespace

RunSummary Summarize(const RunReport& report) {
  if (report.rounds.empty()) throw InvalidArgument("summary of an empty report");
  RunSummary s;
  s.rounds = static_cast<int>(report.rounds.size());
  s.final_metrics = report.rounds.back().global_metrics;
  s.total_sim_time = report.total_sim_time;

  const auto& first = report.rounds.front();
  s.best_loss = {first.round, first.global_metrics.loss};
  s.best_accuracy = {first.round, first.global_metrics.accuracy};
  std::map<int, ClientBest> per_client;
  for (const auto& rec : report.rounds) {
    const auto& m = rec.global_metrics;
    KeepLower(s.best_loss, rec.round, m.loss);
    KeepHigher(s.best_accuracy, rec.round, m.accuracy);
    if (m.auc) {
      if (!s.best_auc) {
        s.best_auc = BestRound{rec.round, *m.auc};
      } else {
        KeepHigher(*s.best_auc, rec.round, *m.auc);
      }
    }
    for (const auto& cm : rec.client_metrics) {
      auto [it, inserted] = per_client.try_emplace(cm.client_id);
      ClientBest& b = it->second;
      if (inserted) {
        b.client_id = cm.client_id;
        b.loss = {rec.round, cm.metrics.loss};
        b.accuracy = {rec.round, cm.metrics.accuracy};
        continue;
      }
      KeepLower(b.loss, rec.round, cm.metrics.loss);
      KeepHigher(b.accuracy, rec.round, cm.metrics.accuracy);
    }
  }

  if (!per_client.empty()) {
    double loss = 0.0, acc = 0.0;
    for (const auto& [id, b] : per_client) {
      s.clients.push_back(b);
      loss += b.loss.value;
      acc += b.accuracy.value;
    }
    const double k = static_cast<double>(per_client.size());
    s.mean_client_best_loss = loss / k;
    s.mean_client_best_accuracy = acc / k;
  }
  return s;
}

double SimTimeThrough(const RunReport& report, int round) {
  std::vector<double> times;
  for (const auto& rec : report.rounds) {
    if (rec.round > round) break;
    times.push_back(rec.sim_time);
  }
  return SumRoundTimes(times);
}

}  // namespace fedsim
