// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fedsim/aggregation.h"
#include "fedsim/config.h"
#include "fedsim/metrics.h"
#include "fedsim/model.h"
#include "fedsim/orchestrator.h"
#include "fedsim/partition.h"
#include "fedsim/report.h"
#include "fedsim/rng.h"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Records the first failure; later checks only add to the count.
class Checker {
 public:
  void Expect(bool cond, const std::string& what) {
    ++checks_;
    if (!cond && ok_) first_ = what;
    ok_ = ok_ && cond;
  }
  Outcome Done(const std::string& summary) const {
    return {ok_, ok_ ? fmt::format("{} ({} checks)", summary, checks_) : first_};
  }

 private:
  bool ok_ = true;
  int checks_ = 0;
  std::string first_;
};

fs::path Examples() { return FEDSIM_EXAMPLES_DIR; }

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset Blobs(std::size_t neg, std::size_t pos, double sep, std::size_t dim,
              std::uint64_t seed, std::int64_t first_id) {
  SyntheticSpec s;
  s.class_means = {std::vector<double>(dim, -sep / 2), std::vector<double>(dim, sep / 2)};
  s.scale = 1.0;
  s.per_class = {neg, pos};
  s.seed = seed;
  s.first_id = first_id;
  return MakeSynthetic(s);
}

ClientSetup TimedClient(int id, double t) {
  ClientSetup c;
  c.shard.client_id = id;
  c.shard.train = Blobs(10, 10, 2.0, 2, 50 + id, id * 1000);
  c.epoch_time = t;
  return c;
}

SimPlan TimingPlan(const std::vector<double>& times, int rounds, int epochs) {
  SimPlan p;
  p.model.input_dim = 2;
  p.train.epochs = epochs;
  p.train.batch_size = 8;
  p.rounds = rounds;
  for (std::size_t i = 0; i < times.size(); ++i) {
    p.clients.push_back(TimedClient(static_cast<int>(i) + 1, times[i]));
  }
  p.global_test = Blobs(5, 5, 2.0, 2, 3, 1'000'000);
  p.seed = 1;
  return p;
}

Outcome TimingModel() {
  Checker c;
  const std::vector<double> t3 = {23.1, 40.1, 24.0};
  const std::vector<double> t10 = {9.8, 10.2, 11.0, 10.5, 9.9, 10.7, 10.1, 10.4, 9.6, 10.0};
  const double a = Run(TimingPlan(t3, 10, 1)).total_sim_time;
  const double b = Run(TimingPlan(t10, 10, 1)).total_sim_time;
  const double d = Run(TimingPlan(t3, 1, 10)).total_sim_time;
  c.Expect(std::abs(a - 401.0) <= 1e-9, fmt::format("3 clients: {}", a));
  c.Expect(std::abs(b - 110.0) <= 1e-9, fmt::format("10 clients: {}", b));
  c.Expect(std::abs(d - 401.0) <= 1e-9, fmt::format("N_e=10, N_r=1: {}", d));
  return c.Done(fmt::format("{} / {} / {} s", FormatSeconds(a), FormatSeconds(b),
                            FormatSeconds(d)));
}

Outcome TimeReduction() {
  Checker c;
  const fs::path out = fs::temp_directory_path() / "fedsim_acceptance_sweep";
  fs::remove_all(out);
  RunSweep(LoadRunConfig((Examples() / "client_count_sweep.json").string()),
           SweepVariable::kClientCount, {"3", "10"}, out);
  std::map<std::string, std::string> pct;
  std::stringstream ss(ReadFile(out / "comparison.csv"));
  for (std::string line; std::getline(ss, line);) {
    if (line.find(",final,") == std::string::npos) continue;
    const auto v0 = line.find(',') + 1;
    pct[line.substr(v0, line.find(',', v0) - v0)] = line.substr(line.rfind(',') + 1);
  }
  fs::remove_all(out);
  c.Expect(pct["3"] == "71.07", "3 clients: " + pct["3"]);
  c.Expect(pct["10"] == "92.06", "10 clients: " + pct["10"]);
  return c.Done(fmt::format("{}% / {}%", pct["3"], pct["10"]));
}

Outcome PartitionFidelity() {
  Checker c;
  const Dataset master = Blobs(1341, 3875, 2.0, 4, 11, 0);
  PartitionPlan plan;
  plan.mode = PartitionMode::kExplicitCounts;
  plan.client_count = 3;
  plan.counts = std::vector<std::size_t>{1400, 2400, 1416};
  plan.positive_fractions = std::vector<double>{0.7143, 0.8333, 0.6179};
  plan.seed = 5;
  const auto shards = Partition(master, plan);
  const auto skew = MakeSkewReport(shards);
  const double want[] = {71.43, 83.33, 61.79};
  std::string got;
  for (std::size_t i = 0; i < 3; ++i) {
    const double pct = skew.clients[i].positive_pct;
    c.Expect(std::abs(pct - want[i]) <= 0.1,
             fmt::format("client {}: {:.2f}%", i + 1, pct));
    got += fmt::format("{:.2f} / ", pct);
  }
  c.Expect(std::abs(skew.global.positive_pct - 74.29) <= 0.1,
           fmt::format("global: {:.2f}%", skew.global.positive_pct));
  c.Expect(skew.global.n == 5216, "global size");
  return c.Done(fmt::format("{}global {:.2f}%", got, skew.global.positive_pct));
}

Outcome AggregationAlgebra() {
  Checker c;
  const int cases = 250;
  for (int t = 0; t < cases; ++t) {
    Rng rng(1000 + t);
    const std::size_t k = 1 + rng.Below(6);
    const std::size_t d = 1 + rng.Below(12);
    ParameterSet layout;
    layout.shapes = {{"w", {d}}};
    std::vector<Update> ups;
    for (std::size_t i = 0; i < k; ++i) {
      Update u;
      u.client_id = static_cast<int>(3 * i + rng.Below(3));
      u.n = 1 + static_cast<std::int64_t>(rng.Below(3000));
      u.params = layout;
      for (std::size_t j = 0; j < d; ++j) u.params.values.push_back(rng.Uniform(-5, 5));
      ups.push_back(u);
    }
    const auto r = WeightedFedAvg(ups);
    double wsum = 0.0;
    for (const auto& w : r.weights_used) wsum += w.weight;
    c.Expect(std::abs(wsum - 1.0) <= 1e-12, fmt::format("case {}: sum w = {}", t, wsum));
    for (std::size_t j = 0; j < d; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& u : ups) {
        lo = std::min(lo, u.params.values[j]);
        hi = std::max(hi, u.params.values[j]);
      }
      const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
      c.Expect(r.params.values[j] >= lo - slack && r.params.values[j] <= hi + slack,
               fmt::format("case {}: convex bound", t));
    }
    auto reversed = ups;
    std::reverse(reversed.begin(), reversed.end());
    c.Expect(WeightedFedAvg(reversed).params.BitIdentical(r.params),
             fmt::format("case {}: order", t));
    auto scaled = ups;
    const double s = rng.Uniform(-3, 3);
    for (auto& u : scaled) {
      for (double& v : u.params.values) v *= s;
    }
    const auto rs = WeightedFedAvg(scaled);
    for (std::size_t j = 0; j < d; ++j) {
      c.Expect(std::abs(rs.params.values[j] - s * r.params.values[j]) <=
                   1e-12 * std::max(1.0, std::abs(s * r.params.values[j])),
               fmt::format("case {}: scale", t));
    }
    auto equal = ups;
    for (auto& u : equal) u.n = 7;
    const auto we = WeightedFedAvg(equal);
    const auto pe = PlainAverage(equal);
    for (std::size_t j = 0; j < d; ++j) {
      c.Expect(std::abs(we.params.values[j] - pe.params.values[j]) <= 1e-12,
               fmt::format("case {}: equal n", t));
    }
    const std::vector<Update> single = {ups[0]};
    c.Expect(WeightedFedAvg(single).params.BitIdentical(ups[0].params),
             fmt::format("case {}: single", t));
  }
  return c.Done(fmt::format("{} randomized cases", cases));
}

Outcome CentralizedEquivalence() {
  Checker c;
  const Dataset data = Blobs(250, 250, 2.0, 3, 21, 0);
  const std::pair<int, int> combos[] = {{1, 1}, {5, 1}, {1, 5}, {20, 1}, {4, 5}, {2, 10}};
  for (const auto& [rounds, epochs] : combos) {
    SimPlan p;
    p.model.input_dim = 3;
    p.train.epochs = epochs;
    p.train.batch_size = 16;
    p.train.learning_rate = 0.05;
    p.rounds = rounds;
    ClientSetup cl;
    cl.shard.client_id = 1;
    cl.shard.train = data;
    p.clients = {cl};
    p.global_test = Blobs(20, 20, 2.0, 3, 22, 1'000'000);
    p.seed = 99;
    const auto fed = Run(p).final_params;
    TrainConfig cfg = p.train;
    cfg.epochs = rounds * epochs;
    cfg.seed = ClientTrainSeed(p.seed, 1);
    const auto central = TrainLocal(p.model, InitialGlobalParams(p), data, cfg).params;
    c.Expect(fed.BitIdentical(central),
             fmt::format("N_r={}, N_e={} differs", rounds, epochs));
  }
  return c.Done("N_r*N_e in {1, 5, 20}, bit-identical");
}

Outcome GradientCorrectness() {
  Checker c;
  double worst = 0.0;
  std::vector<ModelSpec> kinds(3);
  kinds[0].kind = ModelKind::kLogisticRegression;
  kinds[1].kind = ModelKind::kMlp1Hidden;
  kinds[1].activation = Activation::kSigmoid;
  kinds[2].kind = ModelKind::kMlp1Hidden;
  kinds[2].activation = Activation::kRelu;
  for (std::size_t m = 0; m < kinds.size(); ++m) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      ModelSpec spec = kinds[m];
      spec.input_dim = 2 + s % 4;
      spec.hidden_dim = 3 + s % 3;
      Rng rng(s * 31 + m);
      ParameterSet params = InitParams(spec, s);
      for (double& v : params.values) v += rng.Uniform(-0.5, 0.5);
      Dataset data(spec.input_dim);
      for (int i = 0; i < 6; ++i) {
        std::vector<double> row(spec.input_dim);
        for (double& v : row) v = rng.Uniform(-2, 2);
        data.Add(i, row, static_cast<int>(rng.Below(2)));
      }
      const auto grad = LossAndGrad(spec, params, data).grad;
      const double h = 1e-6;
      for (std::size_t k = 0; k < params.size(); ++k) {
        ParameterSet plus = params, minus = params;
        plus.values[k] += h;
        minus.values[k] -= h;
        const double fd = (LossAndGrad(spec, plus, data).loss -
                           LossAndGrad(spec, minus, data).loss) / (2 * h);
        const double a = grad.values[k];
        const double scale = std::max(std::abs(a), std::abs(fd));
        // Coordinates with a vanishing gradient are compared absolutely.
        const double err = scale < 1e-3 ? std::abs(a - fd) * 1e3 : std::abs(a - fd) / scale;
        worst = std::max(worst, err);
        c.Expect(err <= 1e-5, fmt::format("{} seed {} coord {}: {} vs {}",
                                          ToString(spec.kind), s, k, a, fd));
      }
    }
  }
  return c.Done(fmt::format("60 instances, worst relative error {:.2e}", worst));
}

Outcome AucOracle() {
  Checker c;
  double worst = 0.0;
  for (int t = 0; t < 150; ++t) {
    Rng rng(7000 + t);
    const std::size_t n = 2 + rng.Below(120);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::uint64_t levels = t % 3 == 0 ? 0 : 2 + rng.Below(6);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = levels ? static_cast<double>(rng.Below(levels)) : rng.Uniform();
      y[i] = static_cast<int>(rng.Below(2));
    }
    y[0] = 0;
    y[1] = 1;
    std::size_t twice = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] != 1) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (y[j] != 0) continue;
        ++pairs;
        twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
    }
    const double oracle = static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
    const double err = std::abs(RocAuc(s, y).auc - oracle);
    worst = std::max(worst, err);
    c.Expect(err <= 1e-12, fmt::format("instance {}: error {}", t, err));
  }
  return c.Done(fmt::format("150 instances, max error {:.1e}", worst));
}

Outcome Convergence() {
  Checker c;
  SimPlan base;
  base.model.input_dim = 4;
  base.train.epochs = 1;
  base.train.batch_size = 32;
  base.train.learning_rate = 0.002;
  const Dataset master = Blobs(2540, 2460, 3.0, 4, 31, 0);
  PartitionPlan plan;
  plan.mode = PartitionMode::kExplicitCounts;
  plan.client_count = 3;
  plan.counts = std::vector<std::size_t>{3000, 1400, 600};
  plan.positive_fractions = std::vector<double>{0.55, 0.45, 0.3};
  plan.seed = 32;
  for (auto& shard : Partition(master, plan)) base.clients.push_back({shard, 1.0});
  base.global_test = Blobs(500, 500, 3.0, 4, 33, 1'000'000);
  base.seed = 34;

  auto at = [&](int rounds) {
    SimPlan p = base;
    p.rounds = rounds;
    return Run(p).rounds.back().global_metrics;
  };
  const auto m1 = at(1);
  const auto m20 = at(20);
  c.Expect(m20.accuracy >= 0.95, fmt::format("accuracy@20 {}", m20.accuracy));
  c.Expect(m20.auc && *m20.auc >= 0.97, fmt::format("auc@20 {}", m20.auc.value_or(-1)));
  c.Expect(m20.accuracy > m1.accuracy,
           fmt::format("accuracy@20 {} <= accuracy@1 {}", m20.accuracy, m1.accuracy));
  return c.Done(fmt::format("accuracy {:.4f} -> {:.4f}, auc@20 {:.4f}", m1.accuracy,
                            m20.accuracy, m20.auc.value_or(-1)));
}

const Participant* Find(const RoundRecord& rec, int id) {
  for (const auto& p : rec.participants) {
    if (p.client_id == id) return &p;
  }
  return nullptr;
}

Outcome PolicySemantics() {
  Checker c;
  auto leave_cfg = LoadRunConfig((Examples() / "intermittent.json").string());
  leave_cfg.rounds = 10;

  leave_cfg.policy.departure = DeparturePolicy::kDropHistory;
  const auto drop = Run(Prepare(leave_cfg).plan);
  for (const auto& rec : drop.rounds) {
    if (rec.round > 5) c.Expect(!Find(rec, 2), fmt::format("(a) round {}", rec.round));
  }

  leave_cfg.policy.departure = DeparturePolicy::kRetainLast;
  const auto keep = Run(Prepare(leave_cfg).plan);
  for (int r = 6; r <= 10; ++r) {
    const auto* p = Find(keep.rounds[r - 1], 2);
    c.Expect(p && p->age == r - 5, fmt::format("(b) round {}", r));
  }

  auto delay_cfg = LoadRunConfig((Examples() / "delayed.json").string());
  delay_cfg.rounds = 10;
  delay_cfg.events[0].client = 2;
  delay_cfg.policy.delay = DelayPolicy::kUseStaleAcceptAny;
  const auto a = Run(Prepare(delay_cfg).plan);
  for (int r = 5; r <= 9; ++r) {
    const auto* p = Find(a.rounds[r - 1], 2);
    c.Expect(p && p->produced_round == 4 && !p->fresh(), fmt::format("(c) round {}", r));
  }
  const auto* late = Find(a.rounds[9], 2);
  c.Expect(late && late->produced_round == 5, "(c) round 10 late update");

  delay_cfg.policy.delay = DelayPolicy::kExcludeUntilCurrent;
  const auto b = Run(Prepare(delay_cfg).plan);
  for (int r = 5; r <= 9; ++r) {
    c.Expect(!Find(b.rounds[r - 1], 2), fmt::format("(d) round {}", r));
  }
  const auto* back = Find(b.rounds[9], 2);
  c.Expect(!back || back->produced_round == 10, "(d) late submission used at round 10");

  bool differs = false;
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    differs |= std::abs(a.rounds[i].global_metrics.loss - b.rounds[i].global_metrics.loss) > 1e-9;
  }
  c.Expect(differs, "(e) A and B trajectories coincide");
  return c.Done("(a)-(e)");
}

Outcome PolicyNeutrality() {
  Checker c;
  const auto cfg = LoadRunConfig((Examples() / "three_clients.json").string());
  std::string ref;
  for (const char* code : {"1A", "1B", "2A", "2B"}) {
    auto p = Prepare(cfg);
    p.plan.policy = ParsePolicyCode(code, p.plan.policy);
    const std::string csv = RoundsCsv(Run(p.plan));
    if (ref.empty()) ref = csv;
    c.Expect(csv == ref, fmt::format("policy {} rounds.csv differs", code));
  }
  return c.Done("1A/1B/2A/2B identical rounds.csv");
}

Outcome NoiseVanishes() {
  Checker c;
  ParameterSet fixed;
  fixed.shapes = {{"w", {16}}};
  Rng rng(12);
  for (int i = 0; i < 16; ++i) fixed.values.push_back(rng.Uniform(-2, 2));
  const int copies = 10000;
  std::vector<double> mean(fixed.size(), 0.0);
  for (int k = 0; k < copies; ++k) {
    const auto noisy = AddUniformNoise(fixed, 1.0, DeriveSeed(2024, {static_cast<std::uint64_t>(k)}));
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += noisy.values[j];
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    worst = std::max(worst, std::abs(mean[j] / copies - fixed.values[j]));
  }
  c.Expect(worst <= 0.05, fmt::format("max error {}", worst));
  return c.Done(fmt::format("max coordinate error {:.4f}", worst));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"timing model", TimingModel},
      {"time reduction", TimeReduction},
      {"partition fidelity", PartitionFidelity},
      {"aggregation algebra", AggregationAlgebra},
      {"centralized equivalence", CentralizedEquivalence},
      {"gradient correctness", GradientCorrectness},
      {"AUC oracle", AucOracle},
      {"convergence", Convergence},
      {"policy semantics", PolicySemantics},
      {"no-event policy neutrality", PolicyNeutrality},
      {"noise averages out", NoiseVanishes},
  };
  int failed = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.ok;
    std::printf("%s criterion %d (%s): %s\n", o.ok ? "PASS" : "FAIL", index, name,
                o.detail.c_str());
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
