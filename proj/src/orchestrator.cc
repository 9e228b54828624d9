#include "fedsim/orchestrator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "fedsim/error.h"
#include "fedsim/rng.h"

namespace fedsim {

namespace {

// Stream tags for DeriveSeed.
constexpr std::uint64_t kInitTag = 0x696e6974;          // "init"
constexpr std::uint64_t kTrainTag = 0x747261696e;       // "train"
constexpr std::uint64_t kClientNoiseTag = 0x636e6f6973;  // "cnois"
constexpr std::uint64_t kServerNoiseTag = 0x736e6f6973;  // "snois"

}  // namespace

std::string_view ToString(DeparturePolicy p) {
  return p == DeparturePolicy::kDropHistory ? "drop-history" : "retain-last";
}

std::string_view ToString(DelayPolicy p) {
  return p == DelayPolicy::kUseStaleAcceptAny ? "use-stale-accept-any"
                                              : "exclude-until-current";
}

DeparturePolicy ParseDeparturePolicy(std::string_view name) {
  if (name == "drop-history") return DeparturePolicy::kDropHistory;
  if (name == "retain-last") return DeparturePolicy::kRetainLast;
  throw InvalidArgument(fmt::format("unknown departure policy '{}'", name));
}

DelayPolicy ParseDelayPolicy(std::string_view name) {
  if (name == "use-stale-accept-any") return DelayPolicy::kUseStaleAcceptAny;
  if (name == "exclude-until-current") return DelayPolicy::kExcludeUntilCurrent;
  throw InvalidArgument(fmt::format("unknown delay policy '{}'", name));
}

std::string_view ToString(NoisePlacement p) {
  return p == NoisePlacement::kClient ? "client" : "server";
}

NoisePlacement ParseNoisePlacement(std::string_view name) {
  if (name == "client") return NoisePlacement::kClient;
  if (name == "server") return NoisePlacement::kServer;
  throw InvalidArgument(fmt::format("unknown noise placement '{}'", name));
}

std::string_view ToString(EventKind k) {
  switch (k) {
    case EventKind::kLeave:
      return "leave";
    case EventKind::kJoin:
      return "join";
    case EventKind::kDelay:
      return "delay";
  }
  return "?";
}

std::string IntermittencyEvent::Describe() const {
  if (kind == EventKind::kDelay) {
    return fmt::format("round {} delay client {} until round {}", round,
                       client_id, resume_round);
  }
  return fmt::format("round {} {} client {}", round, ToString(kind), client_id);
}

ParameterSet InitialGlobalParams(const SimPlan& plan) {
  return InitParams(plan.model, DeriveSeed(plan.seed, {kInitTag}));
}

std::uint64_t ClientTrainSeed(std::uint64_t plan_seed, int client_id) {
  return DeriveSeed(plan_seed,
                    {kTrainTag, static_cast<std::uint64_t>(client_id)});
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void ValidateSetup(const SimPlan& plan, const ClientSetup& c,
                   const std::string& where) {
  if (c.shard.train.empty()) {
    throw InvalidArgument(where + ": client has no training samples");
  }
  if (c.shard.train.dim() != plan.model.input_dim ||
      (!c.shard.test.empty() && c.shard.test.dim() != plan.model.input_dim)) {
    throw InvalidArgument(where + ": feature width does not match the model");
  }
  if (!(c.epoch_time > 0.0) || !std::isfinite(c.epoch_time)) {
    throw InvalidArgument(where + ": epoch time must be positive");
  }
}

int KindOrder(EventKind k) {
  switch (k) {
    case EventKind::kJoin:
      return 0;
    case EventKind::kDelay:
      return 1;
    case EventKind::kLeave:
      return 2;
  }
  return 3;
}

}  // namespace

void ValidatePlan(const SimPlan& plan) {
  if (plan.rounds < 1) throw InvalidArgument("rounds (N_r) must be >= 1");
  if (plan.train.epochs < 1) {
    throw InvalidArgument("local epochs (N_e) must be >= 1");
  }
  plan.train.Validate();
  plan.model.Validate();
  if (plan.threads < 1) throw InvalidArgument("threads must be >= 1");
  if (plan.global_test.empty()) throw InvalidArgument("global test set is empty");
  if (plan.global_test.dim() != plan.model.input_dim) {
    throw InvalidArgument("global test feature width does not match the model");
  }
  if (plan.noise && (!(plan.noise->amplitude > 0.0) ||
                     !std::isfinite(plan.noise->amplitude))) {
    throw InvalidArgument("noise amplitude must be positive");
  }

  struct Tracked {
    bool active = true;
    int delay_event = -1;  // index of the most recent delay
  };
  std::map<int, Tracked> known;
  for (const auto& c : plan.clients) {
    if (!known.emplace(c.client_id(), Tracked{}).second) {
      throw InvalidArgument(
          fmt::format("client id {} is used twice", c.client_id()));
    }
    ValidateSetup(plan, c, fmt::format("client {}", c.client_id()));
  }

  std::vector<std::size_t> order(plan.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = plan.events[a];
    const auto& eb = plan.events[b];
    if (ea.round != eb.round) return ea.round < eb.round;
    return KindOrder(ea.kind) < KindOrder(eb.kind);
  });

  auto where = [&](std::size_t i) {
    return fmt::format("event #{} ({})", i, plan.events[i].Describe());
  };

  for (std::size_t i : order) {
    const auto& ev = plan.events[i];
    if (ev.round < 1 || ev.round > plan.rounds) {
      throw InvalidArgument(fmt::format("{}: round outside 1..{}", where(i),
                                        plan.rounds));
    }
    auto it = known.find(ev.client_id);
    switch (ev.kind) {
      case EventKind::kJoin: {
        if (it != known.end()) {
          throw InvalidArgument(
              fmt::format("{}: client id {} already in use", where(i),
                          ev.client_id));
        }
        if (!ev.joiner) throw InvalidArgument(where(i) + ": join without data");
        if (ev.joiner->client_id() != ev.client_id) {
          throw InvalidArgument(where(i) + ": joiner shard carries another id");
        }
        ValidateSetup(plan, *ev.joiner, where(i));
        known.emplace(ev.client_id, Tracked{});
        break;
      }
      case EventKind::kDelay: {
        if (it == known.end() || !it->second.active) {
          throw InvalidArgument(where(i) + ": target is not an active client");
        }
        if (ev.resume_round <= ev.round) {
          throw InvalidArgument(where(i) + ": resume round must follow the delay");
        }
        const int prev = it->second.delay_event;
        if (prev >= 0 && ev.round <= plan.events[prev].resume_round) {
          throw InvalidArgument(fmt::format("{} overlaps {}", where(i),
                                            where(static_cast<std::size_t>(prev))));
        }
        it->second.delay_event = static_cast<int>(i);
        break;
      }
      case EventKind::kLeave: {
        if (it == known.end() || !it->second.active) {
          throw InvalidArgument(where(i) + ": target is not an active client");
        }
        const int prev = it->second.delay_event;
        if (prev >= 0 && ev.round <= plan.events[prev].resume_round) {
          throw InvalidArgument(
              fmt::format("{} contradicts {}: client leaves while delayed",
                          where(i), where(static_cast<std::size_t>(prev))));
        }
        it->second.active = false;
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Federation

Federation::Federation(std::vector<ClientSetup> clients, PolicyConfig policy)
    : policy_(policy) {
  for (auto& c : clients) {
    const int id = c.client_id();
    ClientState st;
    st.client_id = id;
    st.shard = std::move(c.shard);
    st.epoch_time = c.epoch_time;
    st.join_round = 1;
    if (!clients_.emplace(id, std::move(st)).second) {
      throw InvalidArgument(fmt::format("client id {} is used twice", id));
    }
  }
}

ClientState& Federation::client(int client_id) {
  auto it = clients_.find(client_id);
  if (it == clients_.end()) {
    throw InvalidArgument(fmt::format("unknown client {}", client_id));
  }
  return it->second;
}

void Federation::ApplyDeparture(int client_id) {
  ClientState& st = client(client_id);
  if (st.status != ClientStatus::kActive) {
    throw InvalidArgument(fmt::format("client {} already departed", client_id));
  }
  st.status = ClientStatus::kDeparted;
  st.delay.reset();
  if (policy_.departure == DeparturePolicy::kDropHistory) st.last_update.reset();
}

void Federation::ApplyJoin(const ClientSetup& joiner, int round) {
  const int id = joiner.client_id();
  if (clients_.contains(id)) {
    throw InvalidArgument(fmt::format("client id {} already in use", id));
  }
  ClientState st;
  st.client_id = id;
  st.shard = joiner.shard;
  st.epoch_time = joiner.epoch_time;
  st.join_round = round;
  clients_.emplace(id, std::move(st));
}

void Federation::ApplyDelay(int client_id, int round, int resume_round) {
  ClientState& st = client(client_id);
  if (st.status != ClientStatus::kActive) {
    throw InvalidArgument(fmt::format("client {} is not active", client_id));
  }
  if (resume_round <= round) {
    throw InvalidArgument("resume round must follow the delay round");
  }
  if (st.delay) {
    throw InvalidArgument(fmt::format(
        "client {} is already delayed from round {} to {}", client_id,
        st.delay->start_round, st.delay->resume_round));
  }
  st.delay = DelayWindow{round, resume_round, std::nullopt};
}

// ---------------------------------------------------------------------------
// Round loop

namespace {

struct TrainJob {
  int client_id = 0;
  int trained_round = 0;  // whose broadcast the client trains on
  bool late = false;      // Approach A submission held back until resume
};

std::vector<ParameterSet> RunJobs(const SimPlan& plan, Federation& fed,
                                  const ParameterSet& broadcast,
                                  const std::vector<TrainJob>& jobs) {
  std::vector<ParameterSet> out(jobs.size());
  auto work = [&](std::size_t j) {
    const TrainJob& job = jobs[j];
    const ClientState& st = fed.clients().at(job.client_id);
    TrainConfig cfg = plan.train;
    cfg.seed = ClientTrainSeed(plan.seed, job.client_id);
    cfg.epoch_offset = static_cast<std::uint64_t>(job.trained_round - 1) *
                       static_cast<std::uint64_t>(plan.train.epochs);
    ParameterSet p =
        TrainLocal(plan.model, broadcast, st.shard.train, cfg).params;
    if (plan.noise && plan.noise->placement == NoisePlacement::kClient) {
      p = AddUniformNoise(
          p, plan.noise->amplitude,
          DeriveSeed(plan.seed, {kClientNoiseTag,
                                 static_cast<std::uint64_t>(job.client_id),
                                 static_cast<std::uint64_t>(job.trained_round)}));
    }
    out[j] = std::move(p);
  };

  const auto workers = std::min<std::size_t>(plan.threads, jobs.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) work(j);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = next++; j < jobs.size(); j = next++) work(j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string ParticipantLine(int round, const Participant& p) {
  return fmt::format("round {}: aggregate client {} {} n={} w={:.17g}", round,
                     p.client_id,
                     p.fresh() ? std::string("fresh")
                               : fmt::format("stale(age={})", p.age),
                     p.n, p.weight);
}

}  // namespace

RunReport Run(const SimPlan& plan) {
  ValidatePlan(plan);
  Federation fed(plan.clients, plan.policy);
  ParameterSet global = InitialGlobalParams(plan);
  RunReport report;
  const bool accept_any = plan.policy.delay == DelayPolicy::kUseStaleAcceptAny;

  for (int r = 1; r <= plan.rounds; ++r) {
    std::vector<const IntermittencyEvent*> leaves;
    for (const auto& ev : plan.events) {
      if (ev.round != r) continue;
      switch (ev.kind) {
        case EventKind::kJoin:
          fed.ApplyJoin(*ev.joiner, r);
          report.audit.push_back(fmt::format(
              "round {}: client {} joins with n={}", r, ev.client_id,
              ev.joiner->shard.n_train()));
          break;
        case EventKind::kDelay:
          fed.ApplyDelay(ev.client_id, r, ev.resume_round);
          report.audit.push_back(
              fmt::format("round {}: client {} misses the deadline until round {}",
                          r, ev.client_id, ev.resume_round));
          break;
        case EventKind::kLeave:
          leaves.push_back(&ev);
          break;
      }
    }

    const ParameterSet broadcast = global;
    std::vector<Update> updates;
    std::vector<TrainJob> jobs;

    for (const auto& entry : fed.clients()) {
      const int id = entry.first;
      ClientState& c = fed.client(id);
      if (c.status == ClientStatus::kDeparted) {
        if (plan.policy.departure == DeparturePolicy::kRetainLast &&
            c.last_update) {
          updates.push_back(*c.last_update);
        }
        continue;
      }
      if (c.delay) {
        DelayWindow& d = *c.delay;
        if (r == d.start_round && accept_any) {
          jobs.push_back({id, r, /*late=*/true});
        }
        if (r < d.resume_round) {
          if (accept_any && c.last_update) updates.push_back(*c.last_update);
          continue;
        }
        // r == resume_round
        if (accept_any) {
          c.last_update = *d.late_update;
          updates.push_back(*c.last_update);
          c.delay.reset();
          continue;
        }
        report.audit.push_back(fmt::format(
            "round {}: late update of client {} (round {} broadcast) discarded",
            r, id, d.start_round));
        c.delay.reset();
        if (!plan.policy.rejoin_at_resume_round) continue;
      }
      jobs.push_back({id, r, /*late=*/false});
    }

    const auto trained = RunJobs(plan, fed, broadcast, jobs);
    RoundRecord rec;
    rec.round = r;
    double slowest = 0.0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      ClientState& c = fed.client(jobs[j].client_id);
      Update u{c.client_id, trained[j],
               static_cast<std::int64_t>(c.shard.n_train()), jobs[j].trained_round};
      if (jobs[j].late) {
        c.delay->late_update = std::move(u);
        continue;
      }
      c.last_update = u;
      updates.push_back(std::move(u));
      rec.fresh_trainers.push_back(c.client_id);
      slowest = std::max(slowest, c.epoch_time);
    }

    if (updates.empty()) {
      throw PolicyStarvation(r, "no client update is eligible for aggregation");
    }
    rec.aggregate = Aggregate(plan.aggregator, updates);
    if (plan.noise && plan.noise->placement == NoisePlacement::kServer) {
      rec.aggregate.params = AddUniformNoise(
          rec.aggregate.params, plan.noise->amplitude,
          DeriveSeed(plan.seed, {kServerNoiseTag, static_cast<std::uint64_t>(r)}));
    }
    global = rec.aggregate.params;

    std::sort(updates.begin(), updates.end(),
              [](const Update& a, const Update& b) { return a.client_id < b.client_id; });
    for (std::size_t i = 0; i < updates.size(); ++i) {
      Participant p{updates[i].client_id, updates[i].n, updates[i].produced_round,
                    r - updates[i].produced_round,
                    rec.aggregate.weights_used[i].weight};
      report.audit.push_back(ParticipantLine(r, p));
      rec.participants.push_back(p);
    }

    rec.global_metrics = Evaluate(plan.model, global, plan.global_test);
    for (const auto& [id, st] : fed.clients()) {
      if (st.status != ClientStatus::kActive || st.shard.test.empty()) continue;
      rec.client_metrics.push_back(
          {id, Evaluate(plan.model, global, st.shard.test)});
    }
    rec.sim_time = static_cast<double>(plan.train.epochs) * slowest;

    for (const IntermittencyEvent* ev : leaves) {
      fed.ApplyDeparture(ev->client_id);
      report.audit.push_back(fmt::format(
          "round {}: client {} leaves ({})", r, ev->client_id,
          ToString(plan.policy.departure)));
    }
    report.rounds.push_back(std::move(rec));
  }
  std::vector<double> times;
  for (const auto& rec : report.rounds) times.push_back(rec.sim_time);
  report.total_sim_time = SumRoundTimes(times);
  report.final_params = std::move(global);
  return report;
}

double SumRoundTimes(std::span<const double> round_times) {
  std::map<double, std::size_t> counts;
  for (double t : round_times) ++counts[t];
  double total = 0.0;
  for (const auto& [t, k] : counts) total += static_cast<double>(k) * t;
  return total;
}

double SimTime(int local_epochs,
               std::span<const std::vector<double>> fresh_epoch_times) {
  std::vector<double> times;
  for (const auto& round : fresh_epoch_times) {
    double slowest = 0.0;
    for (double t : round) slowest = std::max(slowest, t);
    times.push_back(static_cast<double>(local_epochs) * slowest);
  }
  return SumRoundTimes(times);
}

double StaticSimTime(int rounds, int local_epochs,
                     std::span<const double> epoch_times) {
  double slowest = 0.0;
  for (double t : epoch_times) slowest = std::max(slowest, t);
  return static_cast<double>(rounds) * static_cast<double>(local_epochs) *
         slowest;
}

}  // namespace fedsim
