#include "fedsim/aggregation.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fedsim/error.h"
#include "fedsim/rng.h"

namespace fedsim {

std::string_view ToString(Aggregator agg) {
  return agg == Aggregator::kWeighted ? "weighted" : "plain";
}

Aggregator ParseAggregator(std::string_view name) {
  if (name == "weighted") return Aggregator::kWeighted;
  if (name == "plain") return Aggregator::kPlain;
  throw InvalidArgument(fmt::format("unknown aggregator '{}'", name));
}

namespace {

std::vector<const Update*> SortedChecked(std::span<const Update> updates) {
  if (updates.empty()) throw InvalidArgument("aggregation of zero updates");
  std::vector<const Update*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const Update* a, const Update* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Update& u = *sorted[i];
    if (u.n < 1) {
      throw InvalidArgument(
          fmt::format("update from client {} has n = {}", u.client_id, u.n));
    }
    if (i > 0 && sorted[i - 1]->client_id == u.client_id) {
      throw InvalidArgument(
          fmt::format("two updates from client {}", u.client_id));
    }
    if (!u.params.SameLayout(sorted[0]->params)) {
      throw DimensionError(fmt::format(
          "update from client {} does not match the layout of client {}",
          u.client_id, sorted[0]->client_id));
    }
  }
  return sorted;
}

AggregateResult Combine(const std::vector<const Update*>& sorted,
                        const std::vector<double>& weights) {
  AggregateResult out;
  out.params.shapes = sorted[0]->params.shapes;
  auto& acc = out.params.values;
  // Seeded with the first term rather than 0.0 so a single update with
  // weight 1 is reproduced bit for bit (including signed zeros).
  acc.resize(sorted[0]->params.size());
  for (std::size_t c = 0; c < acc.size(); ++c) {
    acc[c] = weights[0] * sorted[0]->params.values[c];
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& x = sorted[i]->params.values;
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += weights[i] * x[c];
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out.weights_used.push_back({sorted[i]->client_id, weights[i]});
    out.total_n += sorted[i]->n;
  }
  return out;
}

}  // namespace

AggregateResult WeightedFedAvg(std::span<const Update> updates) {
  const auto sorted = SortedChecked(updates);
  std::int64_t total = 0;
  for (const Update* u : sorted) total += u->n;
  std::vector<double> w;
  w.reserve(sorted.size());
  for (const Update* u : sorted) {
    w.push_back(static_cast<double>(u->n) / static_cast<double>(total));
  }
  return Combine(sorted, w);
}

AggregateResult PlainAverage(std::span<const Update> updates) {
  const auto sorted = SortedChecked(updates);
  const std::vector<double> w(sorted.size(),
                              1.0 / static_cast<double>(sorted.size()));
  return Combine(sorted, w);
}

AggregateResult Aggregate(Aggregator agg, std::span<const Update> updates) {
  return agg == Aggregator::kWeighted ? WeightedFedAvg(updates)
                                      : PlainAverage(updates);
}

ParameterSet AddUniformNoise(const ParameterSet& params, double amplitude,
                             std::uint64_t seed) {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw InvalidArgument("noise amplitude must be positive and finite");
  }
  ParameterSet out = params;
  Rng rng(seed);
  for (double& v : out.values) v += rng.Uniform(-amplitude, amplitude);
  return out;
}

}  // namespace fedsim
