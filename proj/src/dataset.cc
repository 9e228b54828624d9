#include "fedsim/dataset.h"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "fedsim/error.h"

namespace fedsim {

void Dataset::Add(std::int64_t id, std::span<const double> row, int label) {
  if (row.size() != dim_) {
    throw DimensionError(fmt::format("sample {} has {} features, expected {}",
                                     id, row.size(), dim_));
  }
  if (label != 0 && label != 1) {
    throw InvalidArgument(fmt::format("sample {} has label {}", id, label));
  }
  features_.insert(features_.end(), row.begin(), row.end());
  labels_.push_back(label);
  ids_.push_back(id);
}

Dataset Dataset::Subset(std::span<const std::size_t> positions) const {
  Dataset out(dim_);
  out.features_.reserve(positions.size() * dim_);
  out.labels_.reserve(positions.size());
  out.ids_.reserve(positions.size());
  for (std::size_t p : positions) out.Add(ids_[p], Row(p), labels_[p]);
  return out;
}

std::size_t Dataset::CountLabel(int label) const {
  std::size_t n = 0;
  for (int l : labels_) n += (l == label);
  return n;
}

void WriteDatasetCsv(const Dataset& data, std::ostream& out) {
  out << "id,label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.Id(i) << ',' << data.Label(i);
    for (double v : data.Row(i)) out << ',' << fmt::format("{:.17g}", v);
    out << '\n';
  }
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T ParseCell(const std::string& cell, std::size_t line_no) {
  T value{};
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument(
        fmt::format("csv line {}: cannot parse '{}'", line_no, cell));
  }
  return value;
}

}  // namespace

Dataset ReadDatasetCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitCsvLine(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw InvalidArgument("csv: header must start with id,label");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 2] != fmt::format("f{}", j)) {
      throw InvalidArgument(
          fmt::format("csv: header column {} should be f{}", j + 2, j));
    }
  }
  Dataset data(dim);
  std::vector<double> row(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != dim + 2) {
      throw DimensionError(fmt::format("csv line {}: {} cells, expected {}",
                                       line_no, cells.size(), dim + 2));
    }
    const auto id = ParseCell<std::int64_t>(cells[0], line_no);
    const int label = ParseCell<int>(cells[1], line_no);
    for (std::size_t j = 0; j < dim; ++j) {
      row[j] = ParseCell<double>(cells[j + 2], line_no);
    }
    data.Add(id, row, label);
  }
  return data;
}

void SaveDatasetCsv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  WriteDatasetCsv(data, out);
}

Dataset LoadDatasetCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadDatasetCsv(in);
}

}  // namespace fedsim
