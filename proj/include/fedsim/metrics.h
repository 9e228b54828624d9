#ifndef FEDSIM_METRICS_H_
#define FEDSIM_METRICS_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fedsim/dataset.h"
#include "fedsim/model.h"

namespace fedsim {

struct MetricSet {
  double loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;  // empty when the data holds a single class
  std::size_t n = 0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

// Threshold sweep over the distinct scores in descending order, starting at
// (0,0) and ending at (1,1). The AUC is the trapezoid area under the curve,
// which counts tied positive/negative pairs as one half. Throws UndefinedAuc
// when either class is absent.
RocResult RocAuc(std::span<const double> scores, std::span<const int> labels);

// Decision rule: p >= 0.5 predicts class 1.
double Accuracy(std::span<const double> probs, std::span<const int> labels);

// Mean clamped binary cross-entropy.
double BinaryCrossEntropy(std::span<const double> probs,
                          std::span<const int> labels);

MetricSet EvaluateScores(std::span<const double> probs,
                         std::span<const int> labels);

// Throws InvalidArgument on an empty dataset.
MetricSet Evaluate(const ModelSpec& spec, const ParameterSet& params,
                   const Dataset& data);

// Two-column "fpr,tpr" CSV.
void WriteRocCsv(const RocCurve& curve, std::ostream& out);

}  // namespace fedsim

#endif  // FEDSIM_METRICS_H_
