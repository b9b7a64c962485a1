#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace difftree {

enum class ColumnKind { Numeric, Categorical };

struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // ordinal order, first appearance
};

// Per-column z-scoring statistics, fitted on the training split only.
// Constant columns keep std 1 so application never divides by zero.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  void fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

struct Dataset {
  Eigen::MatrixXd X;      // n x d, ordinal-encoded but not yet standardized
  Eigen::VectorXd y;      // regression targets or class ordinals
  std::vector<ColumnMeta> columns;  // feature columns, in X order
  ColumnMeta target;
  int num_classes = 0;    // 0 for numeric targets
};

struct CsvSchema {
  std::string target;  // column name
  // Explicit kinds; anything absent is auto-detected (numeric when every cell
  // parses as a number).
  std::map<std::string, ColumnKind> kinds;
};

// Strict parser: header row required, no missing cells, categorical values
// mapped to ordinals by first appearance. Errors carry 1-based data row and
// column name.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  bool stratified = false;
  std::vector<std::string> warnings;
};

// Seeded 60/20/20-style split. Stratification keeps per-class proportions
// within one sample per class per split and falls back to unstratified (with
// a warning record) when any class has fewer than 3 samples.
SplitIndices split_dataset(const Dataset& ds, double train_frac,
                           double val_frac, double test_frac, bool stratify,
                           uint64_t seed);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X,
                          const std::vector<int>& rows);
Eigen::VectorXd take_rows(const Eigen::VectorXd& y,
                          const std::vector<int>& rows);

}  // namespace difftree
