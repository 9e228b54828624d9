#include "fedsim/partition.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "fedsim/error.h"
#include "fedsim/rng.h"

namespace fedsim {

Dataset MakeSynthetic(const SyntheticSpec& spec) {
  const auto& m0 = spec.class_means[0];
  const auto& m1 = spec.class_means[1];
  if (m0.empty() || m0.size() != m1.size()) {
    throw InvalidArgument("class means must be non-empty and of equal length");
  }
  if (!(spec.scale >= 0.0) || !std::isfinite(spec.scale)) {
    throw InvalidArgument("class covariance scale must be finite and >= 0");
  }
  const std::size_t dim = m0.size();
  const std::size_t n = spec.per_class[0] + spec.per_class[1];

  // Label sequence first, then shuffled, then features drawn in row order.
  std::vector<int> labels(n, 1);
  std::fill_n(labels.begin(), spec.per_class[0], 0);
  Rng rng(spec.seed);
  rng.Shuffle(labels);

  Dataset out(dim);
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mean = spec.class_means[labels[i]];
    for (std::size_t j = 0; j < dim; ++j) {
      row[j] = mean[j] + spec.scale * rng.Normal();
    }
    out.Add(spec.first_id + static_cast<std::int64_t>(i), row, labels[i]);
  }
  return out;
}

std::string_view ToString(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::kExplicitCounts:
      return "explicit-counts";
    case PartitionMode::kRandomUniform:
      return "random-uniform";
    case PartitionMode::kLabelSkew:
      return "label-skew";
  }
  return "?";
}

PartitionMode ParsePartitionMode(std::string_view name) {
  if (name == "explicit-counts") return PartitionMode::kExplicitCounts;
  if (name == "random-uniform") return PartitionMode::kRandomUniform;
  if (name == "label-skew") return PartitionMode::kLabelSkew;
  throw InvalidArgument(fmt::format("unknown partition mode '{}'", name));
}

void PartitionPlan::Validate() const {
  if (client_count == 0) throw InvalidArgument("client_count must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1]");
  }
  if (counts) {
    if (counts->size() != client_count) {
      throw InvalidArgument(fmt::format("counts has {} entries, expected {}",
                                        counts->size(), client_count));
    }
    for (std::size_t c : *counts) {
      if (c == 0) throw InvalidArgument("every client count must be positive");
    }
  }
  if (positive_fractions) {
    if (positive_fractions->size() != client_count) {
      throw InvalidArgument(
          fmt::format("positive_fractions has {} entries, expected {}",
                      positive_fractions->size(), client_count));
    }
    for (double f : *positive_fractions) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw InvalidArgument("positive fractions must lie in [0, 1]");
      }
    }
  }
  switch (mode) {
    case PartitionMode::kExplicitCounts:
      if (!counts) throw InvalidArgument("explicit-counts requires counts");
      break;
    case PartitionMode::kRandomUniform:
      if (counts || positive_fractions) {
        throw InvalidArgument(
            "random-uniform takes neither counts nor positive_fractions");
      }
      break;
    case PartitionMode::kLabelSkew:
      if (counts) throw InvalidArgument("label-skew derives its own counts");
      if (!positive_fractions) {
        throw InvalidArgument("label-skew requires positive_fractions");
      }
      break;
  }
}

std::vector<std::size_t> PositiveTargets(std::span<const std::size_t> counts,
                                         std::span<const double> fractions) {
  std::vector<std::size_t> pos(counts.size());
  double exact_total = 0.0;
  std::size_t floor_total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double exact = static_cast<double>(counts[i]) * fractions[i];
    exact_total += exact;
    pos[i] = std::min(counts[i], static_cast<std::size_t>(std::floor(exact)));
    floor_total += pos[i];
  }
  const auto target = static_cast<std::size_t>(std::llround(exact_total));
  std::size_t remainder = target > floor_total ? target - floor_total : 0;
  for (std::size_t i = 0; i < pos.size() && remainder > 0; ++i) {
    if (pos[i] < counts[i]) {
      ++pos[i];
      --remainder;
    }
  }
  return pos;
}

ClientShard SplitTrainTest(int client_id, const Dataset& shard_samples,
                           double train_fraction, std::uint64_t seed) {
  const std::size_t n = shard_samples.size();
  if (n == 0) {
    throw InfeasiblePartition(fmt::format("client {} has no samples", client_id));
  }
  auto order = ShuffledIndices(
      n, DeriveSeed(seed, {static_cast<std::uint64_t>(client_id), 0x7e57}));
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::floor(train_fraction * static_cast<double>(n) + 1e-9)));
  std::span<const std::size_t> all(order);
  ClientShard shard;
  shard.client_id = client_id;
  shard.train = shard_samples.Subset(all.first(n_train));
  shard.test = shard_samples.Subset(all.subspan(n_train));
  return shard;
}

namespace {

std::vector<std::size_t> PositionsWithLabel(const Dataset& d, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.Label(i) == label) out.push_back(i);
  }
  return out;
}

// Draws sizes[i] positions per client from pools, pos first then neg.
std::vector<std::vector<std::size_t>> DrawByLabel(
    const Dataset& master, std::span<const std::size_t> counts,
    std::span<const std::size_t> positives, std::uint64_t seed) {
  auto pos_pool = PositionsWithLabel(master, 1);
  auto neg_pool = PositionsWithLabel(master, 0);
  const std::size_t want_pos =
      std::accumulate(positives.begin(), positives.end(), std::size_t{0});
  const std::size_t want_all =
      std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const std::size_t want_neg = want_all - want_pos;
  if (want_pos > pos_pool.size() || want_neg > neg_pool.size()) {
    throw InfeasiblePartition(fmt::format(
        "plan needs {} positive and {} negative samples, master has {} and {}",
        want_pos, want_neg, pos_pool.size(), neg_pool.size()));
  }
  Rng(DeriveSeed(seed, {1})).Shuffle(pos_pool);
  Rng(DeriveSeed(seed, {2})).Shuffle(neg_pool);
  std::vector<std::vector<std::size_t>> out(counts.size());
  std::size_t pi = 0, ni = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t k = 0; k < positives[c]; ++k) out[c].push_back(pos_pool[pi++]);
    for (std::size_t k = positives[c]; k < counts[c]; ++k) {
      out[c].push_back(neg_pool[ni++]);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> DrawAny(
    const Dataset& master, std::span<const std::size_t> counts,
    std::uint64_t seed) {
  const std::size_t want =
      std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (want > master.size()) {
    throw InfeasiblePartition(fmt::format(
        "plan needs {} samples, master has {}", want, master.size()));
  }
  const auto pool = ShuffledIndices(master.size(), DeriveSeed(seed, {0}));
  std::vector<std::vector<std::size_t>> out(counts.size());
  std::size_t next = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out[c].assign(pool.begin() + next, pool.begin() + next + counts[c]);
    next += counts[c];
  }
  return out;
}

bool LabelsFeasible(std::span<const std::size_t> counts,
                    std::span<const double> fractions, std::size_t positives,
                    std::size_t negatives) {
  const auto pos = PositiveTargets(counts, fractions);
  std::size_t p = 0, n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p += pos[i];
    n += counts[i] - pos[i];
  }
  return p <= positives && n <= negatives;
}

// Largest common per-client size whose label targets fit in the master.
std::vector<std::size_t> LabelSkewCounts(const Dataset& master,
                                         std::span<const double> fractions) {
  const std::size_t n_clients = fractions.size();
  const std::size_t positives = master.CountLabel(1);
  const std::size_t negatives = master.size() - positives;
  const double sum_f = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  const double sum_nf = static_cast<double>(n_clients) - sum_f;
  double bound = static_cast<double>(master.size() / n_clients);
  if (sum_f > 0) bound = std::min(bound, static_cast<double>(positives) / sum_f);
  if (sum_nf > 0) bound = std::min(bound, static_cast<double>(negatives) / sum_nf);
  auto size = static_cast<std::size_t>(std::floor(bound));
  while (size > 0) {
    std::vector<std::size_t> counts(n_clients, size);
    if (LabelsFeasible(counts, fractions, positives, negatives)) return counts;
    --size;
  }
  throw InfeasiblePartition("label-skew fractions cannot be met by the master");
}

}  // namespace

std::vector<ClientShard> Partition(const Dataset& master,
                                   const PartitionPlan& plan) {
  plan.Validate();
  std::vector<std::vector<std::size_t>> picks;
  switch (plan.mode) {
    case PartitionMode::kExplicitCounts:
      if (plan.positive_fractions) {
        const auto pos = PositiveTargets(*plan.counts, *plan.positive_fractions);
        picks = DrawByLabel(master, *plan.counts, pos, plan.seed);
      } else {
        picks = DrawAny(master, *plan.counts, plan.seed);
      }
      break;
    case PartitionMode::kRandomUniform: {
      if (master.size() < plan.client_count) {
        throw InfeasiblePartition(fmt::format(
            "cannot split {} samples over {} clients", master.size(),
            plan.client_count));
      }
      std::vector<std::size_t> counts(plan.client_count,
                                      master.size() / plan.client_count);
      for (std::size_t i = 0; i < master.size() % plan.client_count; ++i) {
        ++counts[i];
      }
      picks = DrawAny(master, counts, plan.seed);
      break;
    }
    case PartitionMode::kLabelSkew: {
      const auto counts = LabelSkewCounts(master, *plan.positive_fractions);
      const auto pos = PositiveTargets(counts, *plan.positive_fractions);
      picks = DrawByLabel(master, counts, pos, plan.seed);
      break;
    }
  }

  std::vector<ClientShard> shards;
  shards.reserve(picks.size());
  for (std::size_t c = 0; c < picks.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    shards.push_back(SplitTrainTest(id, master.Subset(picks[c]),
                                    plan.train_fraction, plan.seed));
  }
  return shards;
}

std::vector<std::size_t> UnassignedPositions(
    const Dataset& master, const std::vector<ClientShard>& shards) {
  std::unordered_set<std::int64_t> used;
  for (const auto& s : shards) {
    used.insert(s.train.ids().begin(), s.train.ids().end());
    used.insert(s.test.ids().begin(), s.test.ids().end());
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < master.size(); ++i) {
    if (!used.contains(master.Id(i))) out.push_back(i);
  }
  return out;
}

namespace {

SkewRow MakeRow(int id, std::size_t n, std::size_t positives) {
  SkewRow row;
  row.client_id = id;
  row.n = n;
  row.positives = positives;
  row.negatives = n - positives;
  if (n > 0) {
    row.positive_pct = 100.0 * static_cast<double>(positives) / static_cast<double>(n);
    row.negative_pct = 100.0 * static_cast<double>(row.negatives) / static_cast<double>(n);
  }
  return row;
}

}  // namespace

SkewReport MakeSkewReport(std::span<const ClientShard> shards) {
  if (shards.empty()) throw InvalidArgument("skew report needs shards");
  SkewReport report;
  std::size_t n_all = 0, pos_all = 0;
  for (const auto& s : shards) {
    const std::size_t pos = s.train.CountLabel(1) + s.test.CountLabel(1);
    report.clients.push_back(MakeRow(s.client_id, s.total(), pos));
    n_all += s.total();
    pos_all += pos;
  }
  report.global = MakeRow(0, n_all, pos_all);
  return report;
}

}  // namespace fedsim
