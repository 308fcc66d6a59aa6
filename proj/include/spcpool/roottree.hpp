#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spcpool/portfolio.hpp"
#include "spcpool/standardize.hpp"

namespace spcpool {

// The manufacturing date enters the split search as an ordinal predictor
// under this name.
inline const std::string kDatePredictor = "mfg_date";

struct TreeParams {
  int max_depth = 5;
  int min_leaf = 5;
  double min_split_improvement = 0.01;  // fraction of the root sum of squares
  int max_splits = 20;
};

// One node of a fitted tree. Leaves keep (n, mean, ss); internal nodes add
// the split rule and the sum-of-squares reduction it achieved.
struct TreeNode {
  std::size_t n = 0;
  double mean = 0.0;
  double ss = 0.0;
  int depth = 0;

  int left = -1;
  int right = -1;
  bool splits_on_date = false;
  int factor_index = -1;                 // categorical splits only
  std::string predictor;                 // factor name or kDatePredictor
  std::vector<std::string> left_levels;  // categorical: levels routed left
  std::vector<std::string> right_levels;
  Date date_threshold{};                 // date: mfg_date <= threshold goes left
  double ss_reduction = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct PartitionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::string> factor_names;
  TreeParams params;
  double root_ss = 0.0;
  std::vector<int> split_order;  // internal nodes in the order they were created

  const TreeNode& root() const { return nodes.front(); }

  // First split's predictor, if the tree split at all.
  std::optional<std::string> top_split_predictor() const;
  // Threshold of the earliest date split, if any.
  std::optional<Date> first_date_threshold() const;
};

// Greedy binary regression tree over the standardized series. Categorical
// factors use the mean-ordering scan (optimal for squared error); the date
// uses ordinal threshold splits. Candidate splits are taken best-first
// until a stopping rule ends growth; ties go to the lexicographically
// first predictor and the leftmost split point, so refits are identical.
PartitionTree fit_tree(const StandardizedSeries& series, const Portfolio& p,
                       const TreeParams& params = {});

// Mean of the leaf the observation reaches. Unseen categorical levels
// follow the child whose mean is closer to the parent's.
double predict(const PartitionTree& t, const Observation& obs);

struct SplitInfo {
  std::string predictor;
  std::string rule;
  double ss_reduction = 0.0;
  std::size_t left_n = 0;
  double left_mean = 0.0;
  std::size_t right_n = 0;
  double right_mean = 0.0;
};

struct FactorImportance {
  std::string predictor;
  double ss_reduction = 0.0;
  double share = 0.0;  // of the total reduction
};

struct TreeReport {
  std::vector<SplitInfo> splits;          // creation order
  std::vector<FactorImportance> importance;  // descending reduction
};

TreeReport describe(const PartitionTree& t);

std::string tree_to_text(const PartitionTree& t);
nlohmann::json tree_to_json(const PartitionTree& t);
void write_importance_csv(const TreeReport& report, const std::filesystem::path& path);

}  // namespace spcpool
