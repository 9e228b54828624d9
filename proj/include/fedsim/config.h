#ifndef FEDSIM_CONFIG_H_
#define FEDSIM_CONFIG_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/error.h"
#include "fedsim/orchestrator.h"
#include "fedsim/partition.h"

namespace fedsim {

// Raised for malformed or invalid run-config files. kParse covers syntax,
// unknown keys and wrong types; kValidation covers values that parse but
// describe an impossible run.
class ConfigError : public Error {
 public:
  enum class Kind { kParse, kValidation };

  ConfigError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SyntheticData {
  std::array<std::vector<double>, 2> class_means;
  double scale = 1.0;
  std::array<std::size_t, 2> per_class = {0, 0};
  std::array<std::size_t, 2> test_per_class = {0, 0};

  bool operator==(const SyntheticData&) const = default;
};

struct CsvData {
  std::string master;
  std::string test;

  bool operator==(const CsvData&) const = default;
};

struct EventSpec {
  int round = 1;
  EventKind kind = EventKind::kLeave;
  int client = 0;
  int resume_round = 0;                    // delay
  std::size_t count = 0;                   // join
  std::optional<double> positive_fraction;  // join
  std::optional<double> train_fraction;     // join
  double epoch_time = 0.0;                  // join

  bool operator==(const EventSpec&) const = default;
};

enum class ReportFormat { kCsv, kJson };

struct RunConfig {
  std::uint64_t seed = 0;
  int rounds = 1;
  ModelSpec model;
  int local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::variant<SyntheticData, CsvData> data;
  PartitionPlan partition;  // seed is derived from `seed`
  std::vector<double> epoch_times;  // one per initial client
  bool epoch_time_scalar = false;   // written as a single number
  std::vector<EventSpec> events;
  PolicyConfig policy;
  Aggregator aggregator = Aggregator::kWeighted;
  std::optional<NoiseConfig> noise;
  std::optional<double> centralized_epoch_time;
  std::vector<int> roc_rounds;
  std::optional<std::string> output_directory;
  std::vector<ReportFormat> report_formats = {ReportFormat::kCsv,
                                              ReportFormat::kJson};
  int threads = 1;
  nlohmann::json sweep_overrides = nlohmann::json::object();

  bool HasFormat(ReportFormat f) const;
};

// Parses a config document. Throws ConfigError(kParse) naming the offending
// key and its line; checks that need no data (counts vs client_count, event
// rounds, ...) raise ConfigError(kValidation).
RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfig(const std::string& path);

// Normalised echo; ParseRunConfig(ToJson(c).dump()) reproduces c.
nlohmann::json ToJson(const RunConfig& config);

// Everything needed to run a config, materialised.
struct PreparedRun {
  SimPlan plan;
  Dataset master;
  std::vector<ClientShard> shards;  // initial clients
  double static_sim_time = 0.0;     // rounds * N_e * max initial epoch time
  std::optional<double> centralized_time;
};

// Builds datasets, partitions and the event script. Partition or plan
// problems surface as ConfigError(kValidation).
PreparedRun Prepare(const RunConfig& config);

}  // namespace fedsim

#endif  // FEDSIM_CONFIG_H_
