#include "spcpool/roottree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spcpool/csv.hpp"
#include "spcpool/errors.hpp"

namespace spcpool {

std::optional<std::string> PartitionTree::top_split_predictor() const {
  if (split_order.empty()) return std::nullopt;
  return nodes[static_cast<std::size_t>(split_order.front())].predictor;
}

std::optional<Date> PartitionTree::first_date_threshold() const {
  for (int idx : split_order) {
    const auto& node = nodes[static_cast<std::size_t>(idx)];
    if (node.splits_on_date) return node.date_threshold;
  }
  return std::nullopt;
}

namespace {

// Fitting works on integer-coded rows; level codes are per-factor and
// assigned in lexicographic level order so refits are reproducible.
struct Frame {
  std::vector<double> y;
  std::vector<long> date;                        // day counts
  std::vector<std::vector<int>> level;           // [factor][row]
  std::vector<std::vector<std::string>> level_names;  // [factor][code]
  std::vector<std::string> factor_names;
};

struct NodeStats {
  std::size_t n = 0;
  double sum = 0.0;
  double ss = 0.0;  // sum of squared deviations from the node mean
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

NodeStats stats_of(const Frame& f, const std::vector<int>& rows) {
  NodeStats s;
  s.n = rows.size();
  for (int r : rows) s.sum += f.y[static_cast<std::size_t>(r)];
  double m = s.mean();
  for (int r : rows) {
    double d = f.y[static_cast<std::size_t>(r)] - m;
    s.ss += d * d;
  }
  return s;
}

// A fully specified candidate split of one node.
struct Candidate {
  double gain = -1.0;
  bool on_date = false;
  int factor_index = -1;           // index into frame factors, -1 for date
  std::vector<int> left_codes;     // categorical
  long date_threshold = 0;         // date
};

// Predictors are searched in lexicographic name order; within one
// predictor the scan goes left to right. Strictly better gains win, so
// ties resolve to the first candidate in that order.
struct Predictor {
  std::string name;
  int factor_index;  // -1 for the date
};

std::vector<Predictor> predictor_order(const Frame& f) {
  std::vector<Predictor> preds;
  preds.push_back({kDatePredictor, -1});
  for (std::size_t i = 0; i < f.factor_names.size(); ++i)
    preds.push_back({f.factor_names[i], static_cast<int>(i)});
  std::stable_sort(preds.begin(), preds.end(),
                   [](const Predictor& a, const Predictor& b) { return a.name < b.name; });
  return preds;
}

Candidate best_split(const Frame& f, const std::vector<int>& rows, const NodeStats& node,
                     const TreeParams& params, const std::vector<Predictor>& preds) {
  Candidate best;
  if (node.ss <= 0.0) return best;
  const double parent_mean = node.mean();
  const auto min_leaf = static_cast<std::size_t>(params.min_leaf);

  for (const auto& pred : preds) {
    if (pred.factor_index < 0) {
      // Ordinal scan over distinct dates.
      std::map<long, NodeStats> groups;
      for (int r : rows) {
        auto& g = groups[f.date[static_cast<std::size_t>(r)]];
        ++g.n;
        g.sum += f.y[static_cast<std::size_t>(r)] - parent_mean;
      }
      if (groups.size() < 2) continue;
      std::size_t left_n = 0;
      double left_sum = 0.0;
      std::size_t i = 0;
      for (const auto& [day, g] : groups) {
        ++i;
        if (i == groups.size()) break;
        left_n += g.n;
        left_sum += g.sum;
        std::size_t right_n = node.n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        double right_sum = -left_sum;  // sums are parent-centered
        double gain = left_sum * left_sum / static_cast<double>(left_n) +
                      right_sum * right_sum / static_cast<double>(right_n);
        if (gain > best.gain) {
          best.gain = gain;
          best.on_date = true;
          best.factor_index = -1;
          best.date_threshold = day;
        }
      }
    } else {
      auto fi = static_cast<std::size_t>(pred.factor_index);
      std::map<int, NodeStats> groups;
      for (int r : rows) {
        auto& g = groups[f.level[fi][static_cast<std::size_t>(r)]];
        ++g.n;
        g.sum += f.y[static_cast<std::size_t>(r)] - parent_mean;
      }
      if (groups.size() < 2) continue;
      // Mean-ordering reduction: order levels by mean response and scan
      // prefixes; the optimal subset split is among them. Mean ties fall
      // back to the level code (lexicographic level name).
      std::vector<std::pair<int, NodeStats>> levels(groups.begin(), groups.end());
      std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
        double ma = a.second.sum / static_cast<double>(a.second.n);
        double mb = b.second.sum / static_cast<double>(b.second.n);
        if (ma != mb) return ma < mb;
        return a.first < b.first;
      });
      std::size_t left_n = 0;
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
        left_n += levels[k].second.n;
        left_sum += levels[k].second.sum;
        std::size_t right_n = node.n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        double right_sum = -left_sum;
        double gain = left_sum * left_sum / static_cast<double>(left_n) +
                      right_sum * right_sum / static_cast<double>(right_n);
        if (gain > best.gain) {
          best.gain = gain;
          best.on_date = false;
          best.factor_index = pred.factor_index;
          best.left_codes.clear();
          for (std::size_t q = 0; q <= k; ++q) best.left_codes.push_back(levels[q].first);
        }
      }
    }
  }
  return best;
}

struct Pending {
  int node_index;
  std::vector<int> rows;
  Candidate candidate;
};

}  // namespace

PartitionTree fit_tree(const StandardizedSeries& series, const Portfolio& p,
                       const TreeParams& params) {
  if (series.source.empty()) throw DomainError("fit_tree: standardized series is empty");
  if (params.max_depth < 1 || params.min_leaf < 1 || params.max_splits < 0 ||
      params.min_split_improvement < 0.0)
    throw DomainError("fit_tree: invalid tree parameters");

  // Integer-code the rows.
  Frame f;
  f.factor_names = p.factor_names;
  f.y.resize(series.source.size());
  f.date.resize(series.source.size());
  f.level.resize(p.factor_names.size());
  f.level_names.resize(p.factor_names.size());
  for (std::size_t fi = 0; fi < p.factor_names.size(); ++fi) {
    std::map<std::string, int> codes;
    for (std::size_t j = 0; j < series.source.size(); ++j)
      codes.emplace(p.observations[series.source[j]].factors[fi], 0);
    int next = 0;
    for (auto& [name, code] : codes) {
      code = next++;
      f.level_names[fi].push_back(name);
    }
    f.level[fi].resize(series.source.size());
    for (std::size_t j = 0; j < series.source.size(); ++j)
      f.level[fi][j] = codes[p.observations[series.source[j]].factors[fi]];
  }
  for (std::size_t j = 0; j < series.source.size(); ++j) {
    const auto& obs = p.observations[series.source[j]];
    f.y[j] = series.values[static_cast<Eigen::Index>(j)];
    f.date[j] = obs.mfg_date.time_since_epoch().count();
  }

  const auto preds = predictor_order(f);

  PartitionTree tree;
  tree.factor_names = p.factor_names;
  tree.params = params;

  std::vector<int> all_rows(series.source.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  NodeStats root_stats = stats_of(f, all_rows);
  tree.root_ss = root_stats.ss;

  TreeNode root;
  root.n = root_stats.n;
  root.mean = root_stats.mean();
  root.ss = root_stats.ss;
  tree.nodes.push_back(root);

  const double min_gain = params.min_split_improvement * tree.root_ss;

  std::vector<Pending> frontier;
  auto consider = [&](int node_index, std::vector<int>&& rows) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
    if (node.depth >= params.max_depth) return;
    if (rows.size() < 2 * static_cast<std::size_t>(params.min_leaf)) return;
    if (node.ss <= 0.0) return;
    Candidate cand = best_split(f, rows, stats_of(f, rows), params, preds);
    if (cand.gain <= 0.0 || cand.gain < min_gain) return;
    frontier.push_back({node_index, std::move(rows), std::move(cand)});
  };
  consider(0, std::move(all_rows));

  int splits_done = 0;
  while (splits_done < params.max_splits && !frontier.empty()) {
    // Best-first growth; ties go to the earliest-created node.
    std::size_t pick = 0;
    for (std::size_t i = 1; i < frontier.size(); ++i) {
      if (frontier[i].candidate.gain > frontier[pick].candidate.gain ||
          (frontier[i].candidate.gain == frontier[pick].candidate.gain &&
           frontier[i].node_index < frontier[pick].node_index))
        pick = i;
    }
    Pending pending = std::move(frontier[pick]);
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));

    const Candidate& cand = pending.candidate;
    std::vector<int> left_rows, right_rows;
    if (cand.on_date) {
      for (int r : pending.rows)
        (f.date[static_cast<std::size_t>(r)] <= cand.date_threshold ? left_rows : right_rows)
            .push_back(r);
    } else {
      auto fi = static_cast<std::size_t>(cand.factor_index);
      std::vector<bool> in_left(f.level_names[fi].size(), false);
      for (int code : cand.left_codes) in_left[static_cast<std::size_t>(code)] = true;
      for (int r : pending.rows)
        (in_left[static_cast<std::size_t>(f.level[fi][static_cast<std::size_t>(r)])] ? left_rows
                                                                                     : right_rows)
            .push_back(r);
    }

    NodeStats ls = stats_of(f, left_rows);
    NodeStats rs = stats_of(f, right_rows);

    auto& node = tree.nodes[static_cast<std::size_t>(pending.node_index)];
    node.ss_reduction = cand.gain;
    node.splits_on_date = cand.on_date;
    node.factor_index = cand.factor_index;
    node.predictor = cand.on_date ? kDatePredictor
                                  : f.factor_names[static_cast<std::size_t>(cand.factor_index)];
    if (cand.on_date) {
      node.date_threshold = Date{std::chrono::days{cand.date_threshold}};
    } else {
      auto fi = static_cast<std::size_t>(cand.factor_index);
      std::vector<bool> in_left(f.level_names[fi].size(), false);
      for (int code : cand.left_codes) in_left[static_cast<std::size_t>(code)] = true;
      // Only levels seen in this node's rows belong to the rule.
      std::vector<bool> seen(f.level_names[fi].size(), false);
      for (int r : pending.rows)
        seen[static_cast<std::size_t>(f.level[fi][static_cast<std::size_t>(r)])] = true;
      for (std::size_t code = 0; code < f.level_names[fi].size(); ++code) {
        if (!seen[code]) continue;
        (in_left[code] ? node.left_levels : node.right_levels).push_back(f.level_names[fi][code]);
      }
    }

    int left_index = static_cast<int>(tree.nodes.size());
    int depth = node.depth;
    TreeNode left_child;
    left_child.n = ls.n;
    left_child.mean = ls.mean();
    left_child.ss = ls.ss;
    left_child.depth = depth + 1;
    tree.nodes.push_back(left_child);
    TreeNode right_child;
    right_child.n = rs.n;
    right_child.mean = rs.mean();
    right_child.ss = rs.ss;
    right_child.depth = depth + 1;
    tree.nodes.push_back(right_child);
    tree.nodes[static_cast<std::size_t>(pending.node_index)].left = left_index;
    tree.nodes[static_cast<std::size_t>(pending.node_index)].right = left_index + 1;
    tree.split_order.push_back(pending.node_index);
    ++splits_done;

    consider(left_index, std::move(left_rows));
    consider(left_index + 1, std::move(right_rows));
  }
  return tree;
}

double predict(const PartitionTree& t, const Observation& obs) {
  const TreeNode* node = &t.root();
  while (!node->is_leaf()) {
    const TreeNode& left = t.nodes[static_cast<std::size_t>(node->left)];
    const TreeNode& right = t.nodes[static_cast<std::size_t>(node->right)];
    bool go_left;
    if (node->splits_on_date) {
      go_left = obs.mfg_date <= node->date_threshold;
    } else {
      if (node->factor_index < 0 ||
          static_cast<std::size_t>(node->factor_index) >= obs.factors.size())
        throw DomainError("predict: observation lacks split factor '" + node->predictor + "'");
      const std::string& lvl = obs.factors[static_cast<std::size_t>(node->factor_index)];
      if (std::find(node->left_levels.begin(), node->left_levels.end(), lvl) !=
          node->left_levels.end()) {
        go_left = true;
      } else if (std::find(node->right_levels.begin(), node->right_levels.end(), lvl) !=
                 node->right_levels.end()) {
        go_left = false;
      } else {
        // Unseen level: follow the child whose mean sits closer to this
        // node's own mean.
        go_left = std::abs(left.mean - node->mean) <= std::abs(right.mean - node->mean);
      }
    }
    node = go_left ? &left : &right;
  }
  return node->mean;
}

namespace {

std::string level_set_text(const std::vector<std::string>& levels) {
  std::string out = "{";
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += ", ";
    out += levels[i];
  }
  out += "}";
  return out;
}

std::string rule_text(const TreeNode& node) {
  if (node.splits_on_date) return node.predictor + " <= " + format_date(node.date_threshold);
  return node.predictor + " in " + level_set_text(node.left_levels);
}

}  // namespace

TreeReport describe(const PartitionTree& t) {
  TreeReport report;
  std::map<std::string, double> totals;
  for (int idx : t.split_order) {
    const auto& node = t.nodes[static_cast<std::size_t>(idx)];
    const auto& left = t.nodes[static_cast<std::size_t>(node.left)];
    const auto& right = t.nodes[static_cast<std::size_t>(node.right)];
    report.splits.push_back({node.predictor, rule_text(node), node.ss_reduction, left.n, left.mean,
                             right.n, right.mean});
    totals[node.predictor] += node.ss_reduction;
  }
  double grand = 0.0;
  for (const auto& [name, red] : totals) grand += red;
  for (const auto& [name, red] : totals)
    report.importance.push_back({name, red, grand > 0.0 ? red / grand : 0.0});
  std::stable_sort(report.importance.begin(), report.importance.end(),
                   [](const FactorImportance& a, const FactorImportance& b) {
                     if (a.ss_reduction != b.ss_reduction) return a.ss_reduction > b.ss_reduction;
                     return a.predictor < b.predictor;
                   });
  return report;
}

namespace {

void node_text(const PartitionTree& t, int idx, int indent, std::string& out) {
  const auto& node = t.nodes[static_cast<std::size_t>(idx)];
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
  char buf[96];
  std::snprintf(buf, sizeof buf, "n=%zu mean=%.6g ss=%.6g", node.n, node.mean, node.ss);
  out += buf;
  if (!node.is_leaf()) {
    out += "  split: ";
    out += rule_text(node);
    std::snprintf(buf, sizeof buf, " (ss_reduction=%.6g)", node.ss_reduction);
    out += buf;
    out += '\n';
    node_text(t, node.left, indent + 1, out);
    node_text(t, node.right, indent + 1, out);
  } else {
    out += '\n';
  }
}

nlohmann::json node_json(const PartitionTree& t, int idx) {
  const auto& node = t.nodes[static_cast<std::size_t>(idx)];
  nlohmann::json j;
  j["n"] = node.n;
  j["mean"] = node.mean;
  j["ss"] = node.ss;
  if (!node.is_leaf()) {
    j["predictor"] = node.predictor;
    j["ss_reduction"] = node.ss_reduction;
    if (node.splits_on_date) {
      j["date_threshold"] = format_date(node.date_threshold);
    } else {
      j["left_levels"] = node.left_levels;
      j["right_levels"] = node.right_levels;
    }
    j["left"] = node_json(t, node.left);
    j["right"] = node_json(t, node.right);
  }
  return j;
}

}  // namespace

std::string tree_to_text(const PartitionTree& t) {
  std::string out;
  node_text(t, 0, 0, out);
  return out;
}

nlohmann::json tree_to_json(const PartitionTree& t) {
  nlohmann::json j;
  j["root_ss"] = t.root_ss;
  j["n_splits"] = t.split_order.size();
  j["tree"] = node_json(t, 0);
  return j;
}

void write_importance_csv(const TreeReport& report, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row({"predictor", "ss_reduction", "share"});
  for (const auto& imp : report.importance)
    w.row({imp.predictor, csv::format_double(imp.ss_reduction), csv::format_double(imp.share)});
}

}  // namespace spcpool
