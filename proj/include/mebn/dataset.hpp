#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mebn/errors.hpp"

namespace mebn {

// Complete table of continuous columns plus one group label per row.
// Group labels are stored as indices into group_labels.
struct GroupedDataset {
  std::vector<std::string> columns;
  std::string group_column = "F";
  std::vector<std::string> group_labels;
  Eigen::MatrixXd values;   // rows x columns
  std::vector<int> groups;  // one per row, in [0, group_labels.size())

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t width() const { return columns.size(); }
  std::size_t group_count() const { return group_labels.size(); }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw DataError("unknown column '" + name + "'");
  }

  int group_index(const std::string& label) const {
    for (std::size_t j = 0; j < group_labels.size(); ++j)
      if (group_labels[j] == label) return static_cast<int>(j);
    throw DataError("unknown group label '" + label + "'");
  }

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> n(group_count(), 0);
    for (int g : groups) ++n[static_cast<std::size_t>(g)];
    return n;
  }

  std::vector<std::vector<std::size_t>> rows_by_group() const {
    std::vector<std::vector<std::size_t>> out(group_count());
    for (std::size_t r = 0; r < groups.size(); ++r) out[static_cast<std::size_t>(groups[r])].push_back(r);
    return out;
  }

  // Throws DataError when any invariant is violated.
  void validate() const {
    if (static_cast<std::size_t>(values.cols()) != columns.size())
      throw DataError("value matrix has " + std::to_string(values.cols()) + " columns, expected " +
                      std::to_string(columns.size()));
    if (groups.size() != rows()) throw DataError("group label count does not match row count");
    std::set<std::string> names(columns.begin(), columns.end());
    if (names.size() != columns.size()) throw DataError("duplicate column names");
    if (names.contains(group_column)) throw DataError("group column name clashes with a data column");
    for (std::size_t r = 0; r < groups.size(); ++r)
      if (groups[r] < 0 || static_cast<std::size_t>(groups[r]) >= group_count())
        throw DataError("row " + std::to_string(r + 1) + ": group index out of range");
    if (!values.allFinite()) throw DataError("data contain non-finite values");
  }
};

}  // namespace mebn
