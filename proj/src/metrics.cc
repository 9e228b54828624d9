#include "fedsim/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "fedsim/error.h"

namespace fedsim {

RocResult RocAuc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length");
  }
  std::size_t pos = 0;
  for (int l : labels) pos += (l == 1);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedAuc("AUC needs at least one sample of each class");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocResult out;
  out.curve.points.push_back({0.0, 0.0});
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  std::size_t tp = 0, fp = 0;
  // Area accumulated in integer-ish units (tp * fp counts) to keep it exact
  // until the final division.
  double area2 = 0.0;  // twice the un-normalised area
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] == 1 ? dtp : dfp) += 1;
    }
    area2 += static_cast<double>(dfp) * static_cast<double>(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    out.curve.points.push_back({static_cast<double>(fp) / q,
                                static_cast<double>(tp) / p});
  }
  out.auc = area2 / (2.0 * p * q);
  return out;
}

double Accuracy(std::span<const double> probs, std::span<const int> labels) {
  if (probs.empty()) throw InvalidArgument("accuracy of zero samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int pred = probs[i] >= 0.5 ? 1 : 0;
    correct += (pred == labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

double BinaryCrossEntropy(std::span<const double> probs,
                          std::span<const int> labels) {
  if (probs.empty()) throw InvalidArgument("loss of zero samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(probs.size());
}

MetricSet EvaluateScores(std::span<const double> probs,
                         std::span<const int> labels) {
  if (probs.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length");
  }
  MetricSet m;
  m.n = probs.size();
  m.loss = BinaryCrossEntropy(probs, labels);
  m.accuracy = Accuracy(probs, labels);
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos > 0 && static_cast<std::size_t>(pos) < labels.size()) {
    m.auc = RocAuc(probs, labels).auc;
  }
  return m;
}

MetricSet Evaluate(const ModelSpec& spec, const ParameterSet& params,
                   const Dataset& data) {
  if (data.empty()) throw InvalidArgument("evaluation on an empty dataset");
  const auto probs = Forward(spec, params, data);
  return EvaluateScores(probs, data.labels());
}

void WriteRocCsv(const RocCurve& curve, std::ostream& out) {
  out << "fpr,tpr\n";
  for (const auto& pt : curve.points) {
    out << fmt::format("{:.17g},{:.17g}\n", pt.fpr, pt.tpr);
  }
}

}  // namespace fedsim
