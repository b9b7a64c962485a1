#include "difftree/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "difftree/errors.hpp"

namespace difftree {

void Standardizer::fit(const Eigen::MatrixXd& X) {
  const double n = static_cast<double>(X.rows());
  mean = X.colwise().sum() / n;
  std.resize(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (X.rows() > 0 && X.col(c).maxCoeff() == X.col(c).minCoeff()) {
      mean(c) = X(0, c);  // exact center for a constant column
      std(c) = 1.0;
      continue;
    }
    const double var = (X.col(c).array() - mean(c)).square().sum() / n;
    std(c) = std::sqrt(var);
  }
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) {
    throw ArgumentError("data.shape", "feature width does not match stats");
  }
  return (X.rowwise() - mean.transpose()).array().rowwise() /
         std.transpose().array();
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("data.io", "cannot open " + path, 0, "");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError("data.empty", "empty file: " + path, 0, "");
  }
  std::vector<std::string> names;
  for (auto& h : split_line(line)) names.push_back(trim(h));
  const size_t width = names.size();

  std::vector<std::vector<std::string>> rows;
  int row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    auto cells = split_line(line);
    if (cells.size() != width) {
      throw IngestionError(
          "data.ragged",
          "row " + std::to_string(row_no) + " has " +
              std::to_string(cells.size()) + " cells, header has " +
              std::to_string(width),
          row_no, "");
    }
    for (size_t c = 0; c < width; ++c) {
      cells[c] = trim(cells[c]);
      if (cells[c].empty()) {
        throw IngestionError("data.missing_cell",
                             "missing value at row " + std::to_string(row_no) +
                                 ", column \"" + names[c] + "\"",
                             row_no, names[c]);
      }
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) {
    throw IngestionError("data.empty", "no data rows in " + path, 0, "");
  }

  int target_col = -1;
  for (size_t c = 0; c < width; ++c) {
    if (names[c] == schema.target) target_col = static_cast<int>(c);
  }
  if (target_col < 0) {
    throw ArgumentError("data.target",
                        "target column \"" + schema.target + "\" not found");
  }

  // Column kinds: explicit schema entry wins, otherwise numeric iff every
  // cell parses.
  std::vector<ColumnKind> kinds(width, ColumnKind::Numeric);
  for (size_t c = 0; c < width; ++c) {
    auto it = schema.kinds.find(names[c]);
    if (it != schema.kinds.end()) {
      kinds[c] = it->second;
      continue;
    }
    for (const auto& r : rows) {
      double v;
      if (!parse_number(r[c], v)) {
        kinds[c] = ColumnKind::Categorical;
        break;
      }
    }
  }

  const int n = static_cast<int>(rows.size());
  Dataset ds;
  ds.X.resize(n, static_cast<Eigen::Index>(width) - 1);
  ds.y.resize(n);

  auto encode_column = [&](size_t c, ColumnMeta& meta,
                           auto&& store) {
    meta.name = names[c];
    meta.kind = kinds[c];
    std::map<std::string, int> seen;
    for (int r = 0; r < n; ++r) {
      const std::string& cell = rows[r][c];
      double value;
      if (kinds[c] == ColumnKind::Numeric) {
        if (!parse_number(cell, value)) {
          throw IngestionError("data.parse",
                               "cannot parse \"" + cell + "\" at row " +
                                   std::to_string(r + 1) + ", column \"" +
                                   names[c] + "\"",
                               r + 1, names[c]);
        }
      } else {
        auto it = seen.find(cell);
        if (it == seen.end()) {
          const int ord = static_cast<int>(meta.categories.size());
          seen.emplace(cell, ord);
          meta.categories.push_back(cell);
          value = ord;
        } else {
          value = it->second;
        }
      }
      store(r, value);
    }
  };

  Eigen::Index xc = 0;
  for (size_t c = 0; c < width; ++c) {
    if (static_cast<int>(c) == target_col) {
      encode_column(c, ds.target, [&](int r, double v) { ds.y(r) = v; });
    } else {
      ColumnMeta meta;
      const Eigen::Index col = xc;
      encode_column(c, meta, [&](int r, double v) { ds.X(r, col) = v; });
      ds.columns.push_back(std::move(meta));
      ++xc;
    }
  }
  if (ds.target.kind == ColumnKind::Categorical) {
    ds.num_classes = static_cast<int>(ds.target.categories.size());
  }
  return ds;
}

SplitIndices split_dataset(const Dataset& ds, double train_frac,
                           double val_frac, double test_frac, bool stratify,
                           uint64_t seed) {
  const double total = train_frac + val_frac + test_frac;
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("config.fractions", "split fractions must sum to 1");
  }
  const int n = static_cast<int>(ds.X.rows());
  std::mt19937_64 rng(seed);
  SplitIndices out;

  auto cut_plain = [&](std::vector<int> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_train = static_cast<int>(std::floor(train_frac * idx.size()));
    const int n_trval =
        static_cast<int>(std::floor((train_frac + val_frac) * idx.size()));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.val.insert(out.val.end(), idx.begin() + n_train,
                   idx.begin() + n_trval);
    out.test.insert(out.test.end(), idx.begin() + n_trval, idx.end());
  };

  if (stratify) {
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < n; ++i) {
      by_class[static_cast<int>(std::lround(ds.y(i)))].push_back(i);
    }
    bool ok = true;
    for (const auto& [label, members] : by_class) {
      if (members.size() < 3) {
        out.warnings.push_back("class " + std::to_string(label) + " has " +
                               std::to_string(members.size()) +
                               " samples; falling back to unstratified split");
        ok = false;
      }
    }
    if (ok) {
      out.stratified = true;
      for (auto& [label, members] : by_class) {
        std::vector<int> idx = members;
        std::shuffle(idx.begin(), idx.end(), rng);
        // Largest-remainder allotment keeps each split within one sample of
        // the class proportion.
        const double sizes[3] = {train_frac * idx.size(),
                                 val_frac * idx.size(),
                                 test_frac * idx.size()};
        int counts[3];
        double fracs[3];
        int assigned = 0;
        for (int s = 0; s < 3; ++s) {
          counts[s] = static_cast<int>(std::floor(sizes[s]));
          fracs[s] = sizes[s] - counts[s];
          assigned += counts[s];
        }
        int order[3] = {0, 1, 2};
        std::stable_sort(order, order + 3,
                         [&](int a, int b) { return fracs[a] > fracs[b]; });
        for (int r = 0; assigned < static_cast<int>(idx.size()); ++r) {
          ++counts[order[r % 3]];
          ++assigned;
        }
        auto it = idx.begin();
        out.train.insert(out.train.end(), it, it + counts[0]);
        it += counts[0];
        out.val.insert(out.val.end(), it, it + counts[1]);
        it += counts[1];
        out.test.insert(out.test.end(), it, idx.end());
      }
      return out;
    }
  }

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  cut_plain(std::move(idx));
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X,
                          const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y,
                          const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  }
  return out;
}

}  // namespace difftree
