#ifndef FEDSIM_AGGREGATION_H_
#define FEDSIM_AGGREGATION_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/parameter_set.h"

namespace fedsim {

// A client's submission: parameters, the number of samples behind them and
// the round whose broadcast they were trained from.
struct Update {
  int client_id = 0;
  ParameterSet params;
  std::int64_t n = 1;
  int produced_round = 0;
};

struct ClientWeight {
  int client_id = 0;
  double weight = 0.0;
};

struct AggregateResult {
  ParameterSet params;
  std::vector<ClientWeight> weights_used;  // ascending client id
  std::int64_t total_n = 0;
};

enum class Aggregator { kWeighted, kPlain };

std::string_view ToString(Aggregator agg);
Aggregator ParseAggregator(std::string_view name);

// w_i = n_i / sum_j n_j, params = sum_i w_i x_i. Coordinates are accumulated
// in ascending client-id order, so the result does not depend on the order
// of `updates`. Throws InvalidArgument on an empty list, duplicate ids or
// n < 1, and DimensionError on mismatched layouts.
AggregateResult WeightedFedAvg(std::span<const Update> updates);

// Unweighted mean; every weight is 1/k.
AggregateResult PlainAverage(std::span<const Update> updates);

AggregateResult Aggregate(Aggregator agg, std::span<const Update> updates);

// Adds an independent uniform(-a, a) draw to every coordinate.
ParameterSet AddUniformNoise(const ParameterSet& params, double amplitude,
                             std::uint64_t seed);

}  // namespace fedsim

#endif  // FEDSIM_AGGREGATION_H_
