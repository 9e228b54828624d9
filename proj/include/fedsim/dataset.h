#ifndef FEDSIM_DATASET_H_
#define FEDSIM_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fedsim {

// Binary-labelled samples. Features are stored row-major, one row per sample.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> Row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int Label(std::size_t i) const { return labels_[i]; }
  std::int64_t Id(std::size_t i) const { return ids_[i]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::int64_t>& ids() const { return ids_; }

  // Throws DimensionError on width mismatch, InvalidArgument on a label
  // outside {0,1}.
  void Add(std::int64_t id, std::span<const double> row, int label);

  // Rows at the given positions, in that order.
  Dataset Subset(std::span<const std::size_t> positions) const;

  std::size_t CountLabel(int label) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<std::int64_t> ids_;
};

// CSV with header "id,label,f0,...,f{d-1}". Values are written with 17
// significant digits so a round trip is exact.
void WriteDatasetCsv(const Dataset& data, std::ostream& out);
Dataset ReadDatasetCsv(std::istream& in);

void SaveDatasetCsv(const Dataset& data, const std::string& path);
Dataset LoadDatasetCsv(const std::string& path);

}  // namespace fedsim

#endif  // FEDSIM_DATASET_H_
