#ifndef FEDSIM_PARTITION_H_
#define FEDSIM_PARTITION_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fedsim/dataset.h"

namespace fedsim {

struct SyntheticSpec {
  std::array<std::vector<double>, 2> class_means;  // index = label
  double scale = 1.0;                              // isotropic std-dev
  std::array<std::size_t, 2> per_class = {0, 0};
  std::uint64_t seed = 0;
  std::int64_t first_id = 0;
};

// Gaussian blobs around each class mean; ids are consecutive from first_id.
// Rows are emitted in a seeded shuffled order so labels are interleaved.
Dataset MakeSynthetic(const SyntheticSpec& spec);

enum class PartitionMode { kExplicitCounts, kRandomUniform, kLabelSkew };

std::string_view ToString(PartitionMode mode);
PartitionMode ParsePartitionMode(std::string_view name);

struct PartitionPlan {
  PartitionMode mode = PartitionMode::kRandomUniform;
  std::size_t client_count = 1;
  std::optional<std::vector<std::size_t>> counts;
  std::optional<std::vector<double>> positive_fractions;
  double train_fraction = 0.75;
  std::uint64_t seed = 0;

  // Structural checks that do not need the master dataset.
  void Validate() const;
};

struct ClientShard {
  int client_id = 0;
  Dataset train;
  Dataset test;

  std::size_t n_train() const { return train.size(); }
  std::size_t total() const { return train.size() + test.size(); }
};

// Per-client positive-label targets: floor of count * fraction, then the
// difference to the rounded grand total is handed out one sample at a time to
// the lowest client ids.
std::vector<std::size_t> PositiveTargets(std::span<const std::size_t> counts,
                                         std::span<const double> fractions);

// Shuffles `shard_samples` with a per-client seed and cuts off the training
// part: max(1, floor(train_fraction * n)) samples.
ClientShard SplitTrainTest(int client_id, const Dataset& shard_samples,
                           double train_fraction, std::uint64_t seed);

// Splits `master` into plan.client_count shards with ids 1..N. Throws
// InfeasiblePartition when the requested label counts are not available.
std::vector<ClientShard> Partition(const Dataset& master,
                                   const PartitionPlan& plan);

// Ids of master samples that were not assigned to any shard, in master order.
std::vector<std::size_t> UnassignedPositions(
    const Dataset& master, const std::vector<ClientShard>& shards);

struct SkewRow {
  int client_id = 0;  // 0 for the global row
  std::size_t n = 0;
  std::size_t negatives = 0;
  std::size_t positives = 0;
  double negative_pct = 0.0;
  double positive_pct = 0.0;
};

struct SkewReport {
  std::vector<SkewRow> clients;
  SkewRow global;
};

// Label distribution per client (train and test together) and overall.
SkewReport MakeSkewReport(std::span<const ClientShard> shards);

}  // namespace fedsim

#endif  // FEDSIM_PARTITION_H_
