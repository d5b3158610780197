#include "fdnc/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "fdnc/io.hpp"

namespace fdnc {

void TrainingSet::add(std::span<const double> theta, double label) {
  if (d == 0) d = theta.size();
  if (theta.size() != d) throw ForestError("training point dimension mismatch");
  x.insert(x.end(), theta.begin(), theta.end());
  y.push_back(label);
}

TrainingSet TrainingSet::from_trace(std::span<const TraceEntry> trace) {
  TrainingSet ts;
  if (!trace.empty()) {
    ts.d = trace.front().theta.size();
    ts.x.reserve(trace.size() * ts.d);
    ts.y.reserve(trace.size());
  }
  for (const auto& e : trace) ts.add(e.theta, e.log_value);
  return ts;
}

Forest::Forest(std::size_t d, ForestParams params, std::vector<Tree> trees,
               std::vector<double> box_lo, std::vector<double> box_hi)
    : d_(d),
      params_(params),
      trees_(std::move(trees)),
      box_lo_(std::move(box_lo)),
      box_hi_(std::move(box_hi)) {
  if (trees_.empty()) throw ForestError("forest needs at least one tree");
}

double predict_tree(const Tree& tree, std::span<const double> theta) {
  std::size_t i = 0;
  while (!tree[i].is_leaf()) {
    const TreeNode& n = tree[i];
    i = theta[static_cast<std::size_t>(n.split_dim)] < n.value ? i + 1 : n.right;
  }
  return tree[i].value;
}

double Forest::predict(std::span<const double> theta) const {
  double s = 0.0;
  for (const Tree& t : trees_) s += predict_tree(t, theta);
  return s / static_cast<double>(trees_.size());
}

bool Forest::in_training_box(std::span<const double> theta) const {
  for (std::size_t j = 0; j < d_; ++j) {
    if (theta[j] < box_lo_[j] || theta[j] > box_hi_[j]) return false;
  }
  return true;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, std::size_t min_leaf, Rng& rng)
      : data_(data), min_leaf_(min_leaf), rng_(rng) {}

  Tree build(std::vector<std::size_t> idx) {
    idx_ = std::move(idx);
    scratch_.resize(idx_.size());
    dims_.resize(data_.d);
    tree_.clear();
    tree_.reserve(2 * idx_.size() / std::max<std::size_t>(min_leaf_, 1) + 1);
    grow(0, idx_.size());
    return std::move(tree_);
  }

 private:
  double value(std::size_t row, std::size_t dim) const { return data_.x[row * data_.d + dim]; }

  void make_leaf(std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += data_.y[idx_[i]];
    TreeNode leaf;
    leaf.count = static_cast<std::uint32_t>(end - begin);
    leaf.value = s / static_cast<double>(end - begin);
    tree_.push_back(leaf);
  }

  // Order statistics k-th smallest (0-based) of dimension `dim` over idx_[begin, end).
  std::pair<double, double> trimmed_range(std::size_t begin, std::size_t end, std::size_t dim) {
    const std::size_t n = end - begin;
    for (std::size_t i = 0; i < n; ++i) scratch_[i] = value(idx_[begin + i], dim);
    auto first = scratch_.begin();
    auto last = first + static_cast<std::ptrdiff_t>(n);
    const auto lo_k = static_cast<std::ptrdiff_t>(min_leaf_ - 1);
    const auto hi_k = static_cast<std::ptrdiff_t>(n - min_leaf_);
    std::nth_element(first, first + hi_k, last);
    const double hi = first[hi_k];
    // After the first nth_element every element before hi_k is <= hi; the lower
    // order statistic lies in that prefix.
    std::nth_element(first, first + lo_k, first + hi_k + 1);
    return {first[lo_k], hi};
  }

  void grow(std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    if (n < 2 * min_leaf_) {
      make_leaf(begin, end);
      return;
    }
    // Dimensions are tried in a random order; each degenerate draw is replaced by the next
    // one, at most d draws in total.
    std::iota(dims_.begin(), dims_.end(), std::size_t{0});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t tries = 0; tries < data_.d; ++tries) {
      std::uniform_int_distribution<std::size_t> pick(tries, data_.d - 1);
      std::swap(dims_[tries], dims_[pick(rng_)]);
      const std::size_t dim = dims_[tries];
      const auto [lo, hi] = trimmed_range(begin, end, dim);
      if (!(hi > lo)) continue;
      // Threshold in (lo, hi]: at least min_leaf points fall strictly below it and at
      // least min_leaf at or above it.
      double t = lo + (1.0 - unif(rng_)) * (hi - lo);
      if (!(t > lo)) t = hi;

      auto mid_it = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                                   idx_.begin() + static_cast<std::ptrdiff_t>(end),
                                   [&](std::size_t row) { return value(row, dim) < t; });
      const auto mid = static_cast<std::size_t>(mid_it - idx_.begin());

      const std::size_t self = tree_.size();
      TreeNode node;
      node.split_dim = static_cast<std::int32_t>(dim);
      node.value = t;
      node.count = static_cast<std::uint32_t>(n);
      tree_.push_back(node);
      grow(begin, mid);
      tree_[self].right = static_cast<std::uint32_t>(tree_.size());
      grow(mid, end);
      return;
    }
    make_leaf(begin, end);
  }

  const TrainingSet& data_;
  std::size_t min_leaf_;
  Rng& rng_;
  std::vector<std::size_t> idx_;
  std::vector<double> scratch_;
  std::vector<std::size_t> dims_;
  Tree tree_;
};

std::vector<std::size_t> subsample(std::size_t M, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(M);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  n = std::min(n, M);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, M - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace

Forest train_forest(const TrainingSet& data, const ForestParams& params, Exec exec) {
  if (data.size() == 0) throw ForestError("empty training set");
  if (data.d == 0 || data.x.size() != data.size() * data.d) {
    throw ForestError("training set points do not match its dimension");
  }
  if (params.n_trees < 1) throw ForestError("n_trees must be at least 1");
  if (params.min_leaf < 1) throw ForestError("min_leaf must be at least 1");
  for (double v : data.y) {
    if (!std::isfinite(v)) throw ForestError("training labels must be finite");
  }

  std::vector<double> lo(data.d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(data.d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.d; ++j) {
      lo[j] = std::min(lo[j], data.x[i * data.d + j]);
      hi[j] = std::max(hi[j], data.x[i * data.d + j]);
    }
  }

  const std::size_t sub = params.subsample_size == 0 ? data.size()
                                                      : std::min(params.subsample_size, data.size());
  std::vector<Tree> trees(params.n_trees);
  for_each_index(exec, params.n_trees, [&](std::size_t b) {
    Rng rng = make_rng(params.seed, "tree", b);
    TreeBuilder builder(data, params.min_leaf, rng);
    trees[b] = builder.build(subsample(data.size(), sub, rng));
  });
  ForestParams stored = params;
  stored.subsample_size = sub;
  return Forest(data.d, stored, std::move(trees), std::move(lo), std::move(hi));
}

std::vector<double> predict_many(const Forest& forest, std::span<const double> points,
                                 Exec exec) {
  const std::size_t d = forest.dim();
  const std::size_t n = d == 0 ? 0 : points.size() / d;
  std::vector<double> out(n);
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) out[i] = forest.predict(points.subspan(i * d, d));
    return out;
  }
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = forest.predict(points.subspan(u * d, d));
  }
  return out;
}

// Serialization

std::string forest_to_json(const Forest& forest) {
  nlohmann::json j;
  j["version"] = kForestFormatVersion;
  j["d"] = forest.dim();
  j["n_trees"] = forest.n_trees();
  j["min_leaf"] = forest.params().min_leaf;
  j["subsample_size"] = forest.params().subsample_size;
  j["seed"] = forest.params().seed;
  j["box_lo"] = forest.box_lo();
  j["box_hi"] = forest.box_hi();
  auto trees = nlohmann::json::array();
  for (const Tree& t : forest.trees()) {
    auto nodes = nlohmann::json::array();
    for (const TreeNode& n : t) nodes.push_back({n.split_dim, n.value, n.right, n.count});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

namespace {

void validate_tree(const Tree& t, std::size_t d) {
  if (t.empty()) throw ForestFormatError("empty tree");
  // Preorder: every internal node's left subtree is contiguous and ends right before `right`.
  std::vector<std::size_t> stack{0};
  std::size_t expected = 0;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (i != expected || i >= t.size()) throw ForestFormatError("tree nodes are not in preorder");
    ++expected;
    const TreeNode& n = t[i];
    if (n.is_leaf()) continue;
    if (static_cast<std::size_t>(n.split_dim) >= d) throw ForestFormatError("split dimension out of range");
    if (n.right <= i + 1 || n.right >= t.size()) throw ForestFormatError("right child index out of range");
    stack.push_back(n.right);
    stack.push_back(i + 1);
  }
  if (expected != t.size()) throw ForestFormatError("unreachable tree nodes");
}

}  // namespace

Forest forest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ForestFormatError(std::string("forest file: ") + e.what());
  }
  try {
    if (!j.contains("version")) throw ForestFormatError("forest file: missing version");
    const int version = j.at("version").get<int>();
    if (version != kForestFormatVersion) {
      throw ForestVersionError("forest file version " + std::to_string(version) +
                               ", expected " + std::to_string(kForestFormatVersion));
    }
    const auto d = j.at("d").get<std::size_t>();
    ForestParams p;
    p.n_trees = j.at("n_trees").get<std::size_t>();
    p.min_leaf = j.at("min_leaf").get<std::size_t>();
    p.subsample_size = j.value("subsample_size", std::size_t{0});
    p.seed = j.value("seed", std::uint64_t{0});
    auto lo = j.at("box_lo").get<std::vector<double>>();
    auto hi = j.at("box_hi").get<std::vector<double>>();
    if (d == 0 || lo.size() != d || hi.size() != d) throw ForestFormatError("forest file: bad dimension");
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        if (!jn.is_array() || jn.size() != 4) throw ForestFormatError("forest file: bad node");
        TreeNode n;
        n.split_dim = jn[0].get<std::int32_t>();
        n.value = jn[1].get<double>();
        n.right = jn[2].get<std::uint32_t>();
        n.count = jn[3].get<std::uint32_t>();
        t.push_back(n);
      }
      validate_tree(t, d);
      trees.push_back(std::move(t));
    }
    if (trees.size() != p.n_trees) throw ForestFormatError("forest file: n_trees does not match trees");
    return Forest(d, p, std::move(trees), std::move(lo), std::move(hi));
  } catch (const nlohmann::json::exception& e) {
    throw ForestFormatError(std::string("forest file: ") + e.what());
  }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  write_text(path, forest_to_json(forest) + "\n");
}

Forest load_forest(const std::filesystem::path& path) { return forest_from_json(read_text(path)); }

}  // namespace fdnc
