#ifndef FEDSIM_ORCHESTRATOR_H_
#define FEDSIM_ORCHESTRATOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/aggregation.h"
#include "fedsim/metrics.h"
#include "fedsim/model.h"
#include "fedsim/partition.h"

namespace fedsim {

// Approach 1 / Approach 2 for clients that leave the federation.
enum class DeparturePolicy { kDropHistory, kRetainLast };
// Approach A / Approach B for clients whose update misses the deadline.
enum class DelayPolicy { kUseStaleAcceptAny, kExcludeUntilCurrent };

std::string_view ToString(DeparturePolicy p);
std::string_view ToString(DelayPolicy p);
DeparturePolicy ParseDeparturePolicy(std::string_view name);
DelayPolicy ParseDelayPolicy(std::string_view name);

struct PolicyConfig {
  DeparturePolicy departure = DeparturePolicy::kDropHistory;
  DelayPolicy delay = DelayPolicy::kUseStaleAcceptAny;
  // Under kExcludeUntilCurrent: whether a returning client trains on the
  // resume round's broadcast and joins that round's aggregation (true), or
  // sits the resume round out and trains from the next one (false).
  bool rejoin_at_resume_round = true;

  bool operator==(const PolicyConfig&) const = default;
};

enum class NoisePlacement { kClient, kServer };
std::string_view ToString(NoisePlacement p);
NoisePlacement ParseNoisePlacement(std::string_view name);

struct NoiseConfig {
  double amplitude = 0.0;
  NoisePlacement placement = NoisePlacement::kClient;
};

struct ClientSetup {
  ClientShard shard;
  double epoch_time = 1.0;  // seconds per local epoch

  int client_id() const { return shard.client_id; }
};

enum class EventKind { kLeave, kJoin, kDelay };
std::string_view ToString(EventKind k);

// Leave: the client takes part in `round` and is gone from round + 1.
// Join: the client trains on the broadcast of `round`.
// Delay: the client's submissions for rounds [round, resume_round) miss the
// deadline; the update trained in `round` arrives at resume_round.
struct IntermittencyEvent {
  int round = 1;
  EventKind kind = EventKind::kLeave;
  int client_id = 0;
  std::optional<ClientSetup> joiner;  // kJoin only
  int resume_round = 0;               // kDelay only

  std::string Describe() const;
};

struct SimPlan {
  ModelSpec model;
  TrainConfig train;  // epochs = local epochs per round; seed is unused
  int rounds = 1;
  std::vector<ClientSetup> clients;
  std::vector<IntermittencyEvent> events;
  PolicyConfig policy;
  Aggregator aggregator = Aggregator::kWeighted;
  std::optional<NoiseConfig> noise;
  Dataset global_test;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Rejects bad round counts, duplicate client ids, events outside [1, rounds]
// and contradictory or overlapping events. Throws InvalidArgument naming the
// offending event(s) by index.
void ValidatePlan(const SimPlan& plan);

// Seeds shared with anyone who wants to reproduce a run by hand.
ParameterSet InitialGlobalParams(const SimPlan& plan);
std::uint64_t ClientTrainSeed(std::uint64_t plan_seed, int client_id);

enum class ClientStatus { kActive, kDeparted };

struct DelayWindow {
  int start_round = 0;
  int resume_round = 0;
  std::optional<Update> late_update;  // trained on the start round broadcast
};

struct ClientState {
  int client_id = 0;
  ClientShard shard;
  double epoch_time = 1.0;
  ClientStatus status = ClientStatus::kActive;
  std::optional<Update> last_update;
  int join_round = 1;
  std::optional<DelayWindow> delay;
};

struct Participant {
  int client_id = 0;
  std::int64_t n = 0;
  int produced_round = 0;
  int age = 0;  // round - produced_round; 0 for fresh updates
  double weight = 0.0;

  bool fresh() const { return age == 0; }
};

struct ClientMetrics {
  int client_id = 0;
  MetricSet metrics;
};

struct RoundRecord {
  int round = 0;
  std::vector<Participant> participants;  // ascending client id
  AggregateResult aggregate;
  MetricSet global_metrics;
  std::vector<ClientMetrics> client_metrics;
  std::vector<int> fresh_trainers;
  double sim_time = 0.0;  // this round only
};

struct RunReport {
  std::vector<RoundRecord> rounds;
  ParameterSet final_params;
  double total_sim_time = 0.0;
  std::vector<std::string> audit;  // membership log, one line per entry
};

// Client roster plus the intermittency rules. Run() drives it; the Apply*
// methods are public so policies can be exercised in isolation.
class Federation {
 public:
  Federation(std::vector<ClientSetup> clients, PolicyConfig policy);

  // Throws InvalidArgument on an unknown or inactive client.
  void ApplyDeparture(int client_id);
  // Throws InvalidArgument when the id was ever used.
  void ApplyJoin(const ClientSetup& joiner, int round);
  // Throws InvalidArgument on an inactive client, resume_round <= round, or
  // a delay that overlaps one already pending.
  void ApplyDelay(int client_id, int round, int resume_round);

  const std::map<int, ClientState>& clients() const { return clients_; }
  ClientState& client(int client_id);
  const PolicyConfig& policy() const { return policy_; }

 private:
  std::map<int, ClientState> clients_;
  PolicyConfig policy_;
};

// Runs plan.rounds rounds. Throws PolicyStarvation when a round ends up with
// no participant.
RunReport Run(const SimPlan& plan);

// Sum of per-round times with equal values grouped as count * value, so a
// run of identical rounds totals exactly rounds * time.
double SumRoundTimes(std::span<const double> round_times);

// Sum over rounds of local_epochs * (slowest fresh trainer's epoch time).
double SimTime(int local_epochs,
               std::span<const std::vector<double>> fresh_epoch_times);

// rounds * local_epochs * max(epoch_times): the static-membership case.
double StaticSimTime(int rounds, int local_epochs,
                     std::span<const double> epoch_times);

}  // namespace fedsim

#endif  // FEDSIM_ORCHESTRATOR_H_
