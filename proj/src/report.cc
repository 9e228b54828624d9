#include "fedsim/report.h"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fedsim/error.h"

namespace fedsim {

using nlohmann::json;

std::string FormatSeconds(double seconds) {
  std::string s = fmt::format("{}", seconds);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string Num(double v) { return fmt::format("{}", v); }

std::string OptNum(const std::optional<double>& v) {
  return v ? Num(*v) : std::string();
}

json OptJson(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json MetricsJson(const MetricSet& m) {
  return {{"loss", m.loss}, {"accuracy", m.accuracy}, {"auc", OptJson(m.auc)},
          {"n", m.n}};
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string RoundsCsv(const RunReport& report) {
  std::ostringstream out;
  out << "round,participants,fresh_trainers,total_n,global_loss,"
         "global_accuracy,global_auc,sim_time,cumulative_sim_time\n";
  for (const auto& rec : report.rounds) {
    const double cumulative = SimTimeThrough(report, rec.round);
    std::string parts, fresh;
    for (const auto& p : rec.participants) {
      if (!parts.empty()) parts += '|';
      parts += p.fresh() ? fmt::format("{}:fresh", p.client_id)
                         : fmt::format("{}:stale({})", p.client_id, p.age);
    }
    for (int id : rec.fresh_trainers) {
      if (!fresh.empty()) fresh += '|';
      fresh += std::to_string(id);
    }
    const auto& m = rec.global_metrics;
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", rec.round, parts, fresh,
                       rec.aggregate.total_n, Num(m.loss), Num(m.accuracy),
                       OptNum(m.auc), Num(rec.sim_time), Num(cumulative));
  }
  return out.str();
}

std::string ClientMetricsCsv(const RunReport& report) {
  std::ostringstream out;
  out << "round,client_id,n,loss,accuracy,auc\n";
  for (const auto& rec : report.rounds) {
    for (const auto& cm : rec.client_metrics) {
      out << fmt::format("{},{},{},{},{},{}\n", rec.round, cm.client_id,
                         cm.metrics.n, Num(cm.metrics.loss),
                         Num(cm.metrics.accuracy), OptNum(cm.metrics.auc));
    }
  }
  return out.str();
}

json SummaryJson(const RunConfig& config, const PreparedRun& prepared,
                 const RunReport& report) {
  const RunSummary s = Summarize(report);
  json j;
  j["config"] = ToJson(config);
  j["seed"] = config.seed;
  j["rounds_completed"] = s.rounds;
  j["parameter_count"] = config.model.ParameterCount();
  j["sim_time"] = report.total_sim_time;
  j["static_sim_time"] = prepared.static_sim_time;
  j["centralized_time"] = OptJson(prepared.centralized_time);
  if (prepared.centralized_time) {
    j["time_reduction"] = 1.0 - report.total_sim_time / *prepared.centralized_time;
  } else {
    j["time_reduction"] = nullptr;
  }
  j["final"] = MetricsJson(s.final_metrics);

  auto best = [&](const BestRound& b) {
    return json{{"round", b.round},
                {"value", b.value},
                {"sim_time", SimTimeThrough(report, b.round)}};
  };
  j["best"]["loss"] = best(s.best_loss);
  j["best"]["accuracy"] = best(s.best_accuracy);
  j["best"]["auc"] = s.best_auc ? best(*s.best_auc) : json(nullptr);

  j["client_best"] = json::array();
  for (const auto& c : s.clients) {
    j["client_best"].push_back({{"client_id", c.client_id},
                                {"loss_round", c.loss.round},
                                {"loss", c.loss.value},
                                {"accuracy_round", c.accuracy.round},
                                {"accuracy", c.accuracy.value}});
  }
  j["mean_client_best_loss"] = OptJson(s.mean_client_best_loss);
  j["mean_client_best_accuracy"] = OptJson(s.mean_client_best_accuracy);

  const SkewReport skew = MakeSkewReport(prepared.shards);
  auto skew_row = [](const SkewRow& r) {
    return json{{"client_id", r.client_id},
                {"n", r.n},
                {"negative_pct", r.negative_pct},
                {"positive_pct", r.positive_pct}};
  };
  j["partition"]["clients"] = json::array();
  for (const auto& r : skew.clients) j["partition"]["clients"].push_back(skew_row(r));
  j["partition"]["global"] = skew_row(skew.global);
  return j;
}

void WriteRunFiles(const std::filesystem::path& dir, const RunConfig& config,
                   const PreparedRun& prepared, const RunReport& report) {
  std::filesystem::create_directories(dir);
  if (config.HasFormat(ReportFormat::kCsv)) {
    WriteText(dir / "rounds.csv", RoundsCsv(report));
    WriteText(dir / "client_metrics.csv", ClientMetricsCsv(report));
    for (int r : config.roc_rounds) {
      if (r < 1 || r > static_cast<int>(report.rounds.size())) continue;
      const auto probs = Forward(prepared.plan.model,
                                 report.rounds[r - 1].aggregate.params,
                                 prepared.plan.global_test);
      std::ostringstream roc;
      WriteRocCsv(RocAuc(probs, prepared.plan.global_test.labels()).curve, roc);
      WriteText(dir / fmt::format("roc_round{}.csv", r), roc.str());
    }
  }
  if (config.HasFormat(ReportFormat::kJson)) {
    WriteText(dir / "summary.json", SummaryJson(config, prepared, report).dump(2) + "\n");
  }
  std::string log;
  for (const auto& line : report.audit) log += line + "\n";
  WriteText(dir / "events.log", log);
}

// ---------------------------------------------------------------------------
// Sweeps

std::string_view ToString(SweepVariable v) {
  switch (v) {
    case SweepVariable::kClientCount:
      return "client-count";
    case SweepVariable::kRounds:
      return "N_r";
    case SweepVariable::kPolicy:
      return "policy";
  }
  return "?";
}

SweepVariable ParseSweepVariable(std::string_view name) {
  if (name == "client-count") return SweepVariable::kClientCount;
  if (name == "N_r") return SweepVariable::kRounds;
  if (name == "policy") return SweepVariable::kPolicy;
  throw InvalidArgument(fmt::format("unknown sweep variable '{}'", name));
}

PolicyConfig ParsePolicyCode(std::string_view code, PolicyConfig base) {
  if (code.size() == 2) {
    if (code[0] != '1' && code[0] != '2') {
      throw InvalidArgument(fmt::format("bad policy code '{}'", code));
    }
    if (code[1] != 'A' && code[1] != 'B') {
      throw InvalidArgument(fmt::format("bad policy code '{}'", code));
    }
    base.departure = code[0] == '1' ? DeparturePolicy::kDropHistory
                                    : DeparturePolicy::kRetainLast;
    base.delay = code[1] == 'A' ? DelayPolicy::kUseStaleAcceptAny
                                : DelayPolicy::kExcludeUntilCurrent;
    return base;
  }
  const auto slash = code.find('/');
  if (slash == std::string_view::npos) {
    throw InvalidArgument(fmt::format("bad policy code '{}'", code));
  }
  base.departure = ParseDeparturePolicy(code.substr(0, slash));
  base.delay = ParseDelayPolicy(code.substr(slash + 1));
  return base;
}

std::string PolicyCode(const PolicyConfig& p) {
  std::string s;
  s += p.departure == DeparturePolicy::kDropHistory ? '1' : '2';
  s += p.delay == DelayPolicy::kUseStaleAcceptAny ? 'A' : 'B';
  return s;
}

RunConfig ConfigForSweepValue(const RunConfig& base, SweepVariable var,
                              const std::string& value) {
  json j = ToJson(base);
  j.erase("sweep_overrides");
  auto as_int = [&](const std::string& v) {
    std::size_t used = 0;
    long long n = 0;
    try {
      n = std::stoll(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size()) {
      throw ConfigError(ConfigError::Kind::kValidation,
                        fmt::format("sweep value '{}' is not an integer", v));
    }
    return n;
  };
  switch (var) {
    case SweepVariable::kClientCount:
      j["partition"]["client_count"] = as_int(value);
      break;
    case SweepVariable::kRounds:
      j["rounds"] = as_int(value);
      break;
    case SweepVariable::kPolicy: {
      PolicyConfig p;
      try {
        p = ParsePolicyCode(value, base.policy);
      } catch (const InvalidArgument& e) {
        throw ConfigError(ConfigError::Kind::kValidation, e.what());
      }
      j["policy"]["departure"] = ToString(p.departure);
      j["policy"]["delay"] = ToString(p.delay);
      break;
    }
  }
  const std::string key(ToString(var));
  if (base.sweep_overrides.contains(key) &&
      base.sweep_overrides[key].contains(value)) {
    j.merge_patch(base.sweep_overrides[key][value]);
  }
  try {
    return ParseRunConfig(j.dump(2));
  } catch (const ConfigError& e) {
    throw ConfigError(e.kind(), fmt::format("sweep value {}={}: {}", key,
                                            value, e.what()));
  }
}

std::optional<double> SweepRow::TimeReduction() const {
  if (!centralized_time) return std::nullopt;
  return 1.0 - sim_time / *centralized_time;
}

std::vector<SweepRow> ComparisonRows(const std::string& value,
                                     const PreparedRun& prepared,
                                     const RunReport& report) {
  const RunSummary s = Summarize(report);
  auto row = [&](const char* selection, int round) {
    SweepRow r;
    r.value = value;
    r.selection = selection;
    r.round = round;
    r.metrics = report.rounds[round - 1].global_metrics;
    r.sim_time = SimTimeThrough(report, round);
    r.centralized_time = prepared.centralized_time;
    return r;
  };
  std::vector<SweepRow> rows;
  rows.push_back(row("final", s.rounds));
  rows.push_back(row("best_loss", s.best_loss.round));
  rows.push_back(row("best_accuracy", s.best_accuracy.round));
  if (s.best_auc) rows.push_back(row("best_auc", s.best_auc->round));
  return rows;
}

std::string ComparisonCsv(SweepVariable var, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "variable,value,selection,round,loss,accuracy,auc,sim_time,"
         "centralized_time,time_reduction_pct\n";
  for (const auto& r : rows) {
    const auto red = r.TimeReduction();
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", ToString(var), r.value,
                       r.selection, r.round, Num(r.metrics.loss),
                       Num(r.metrics.accuracy), OptNum(r.metrics.auc),
                       Num(r.sim_time), OptNum(r.centralized_time),
                       red ? fmt::format("{:.2f}", 100.0 * *red) : std::string());
  }
  return out.str();
}

std::string PolicyAveragesCsv(const std::vector<SweepRun>& runs) {
  std::ostringstream out;
  out << "policy,global_loss,global_accuracy,avg_client_loss,avg_client_accuracy\n";
  for (const auto& run : runs) {
    const auto& last = run.report.rounds.back();
    std::string avg_loss, avg_acc;
    if (!last.client_metrics.empty()) {
      double l = 0.0, a = 0.0;
      for (const auto& cm : last.client_metrics) {
        l += cm.metrics.loss;
        a += cm.metrics.accuracy;
      }
      const double k = static_cast<double>(last.client_metrics.size());
      avg_loss = Num(l / k);
      avg_acc = Num(a / k);
    }
    out << fmt::format("{},{},{},{},{}\n", PolicyCode(run.config.policy),
                       Num(last.global_metrics.loss),
                       Num(last.global_metrics.accuracy), avg_loss, avg_acc);
  }
  return out.str();
}

std::vector<SweepRun> RunSweep(const RunConfig& base, SweepVariable var,
                               const std::vector<std::string>& values,
                               const std::filesystem::path& out_dir) {
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  // Build every config first so a bad value fails before any run starts.
  std::vector<SweepRun> runs;
  for (const auto& v : values) {
    SweepRun run;
    run.value = v;
    run.config = ConfigForSweepValue(base, var, v);
    runs.push_back(std::move(run));
  }
  for (auto& run : runs) run.prepared = Prepare(run.config);

  std::vector<SweepRow> rows;
  for (auto& run : runs) {
    run.report = Run(run.prepared.plan);
    std::string dir_name = fmt::format("{}_{}", ToString(var), run.value);
    for (char& ch : dir_name) {
      if (ch == '/') ch = '+';
    }
    WriteRunFiles(out_dir / dir_name, run.config, run.prepared, run.report);
    auto r = ComparisonRows(run.value, run.prepared, run.report);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::filesystem::create_directories(out_dir);
  WriteText(out_dir / "comparison.csv", ComparisonCsv(var, rows));
  if (var == SweepVariable::kPolicy) {
    WriteText(out_dir / "policy_averages.csv", PolicyAveragesCsv(runs));
  }
  return runs;
}

}  // namespace fedsim
