#ifndef FDNC_FOREST_HPP
#define FDNC_FOREST_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdnc/model.hpp"
#include "fdnc/parallel.hpp"
#include "fdnc/sampler.hpp"

namespace fdnc {

class ForestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated forest file.
class ForestFormatError : public ForestError {
 public:
  using ForestError::ForestError;
};

class ForestVersionError : public ForestError {
 public:
  using ForestError::ForestError;
};

/// Regression pairs (point, label), points stored row-major.
struct TrainingSet {
  std::size_t d = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * d, d}; }

  void add(std::span<const double> theta, double label);
  static TrainingSet from_trace(std::span<const TraceEntry> trace);
};

/// One node of a tree in preorder layout. The left child of an internal node is the next
/// node; `right` indexes the right child. Routing sends theta to the left when
/// theta[split_dim] < value.
struct TreeNode {
  std::int32_t split_dim = -1;  // -1 marks a leaf
  std::uint32_t right = 0;
  std::uint32_t count = 0;      // training points that reached this node
  double value = 0.0;           // split threshold, or the leaf's label mean

  bool is_leaf() const noexcept { return split_dim < 0; }
};

using Tree = std::vector<TreeNode>;

struct ForestParams {
  std::size_t n_trees = 10;
  std::size_t min_leaf = 5;
  std::size_t subsample_size = 10'000;
  std::uint64_t seed = 0;
};

/// Ensemble of random partition trees; prediction is the mean over trees. Immutable once
/// built, so concurrent predict calls are safe.
class Forest {
 public:
  Forest() = default;
  Forest(std::size_t d, ForestParams params, std::vector<Tree> trees,
         std::vector<double> box_lo, std::vector<double> box_hi);

  std::size_t dim() const noexcept { return d_; }
  std::size_t n_trees() const noexcept { return trees_.size(); }
  const ForestParams& params() const noexcept { return params_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }

  double predict(std::span<const double> theta) const;

  /// Training bounding box.
  const std::vector<double>& box_lo() const noexcept { return box_lo_; }
  const std::vector<double>& box_hi() const noexcept { return box_hi_; }
  bool in_training_box(std::span<const double> theta) const;

 private:
  std::size_t d_ = 0;
  ForestParams params_;
  std::vector<Tree> trees_;
  std::vector<double> box_lo_;
  std::vector<double> box_hi_;
};

/// Value of the leaf `theta` lands in.
double predict_tree(const Tree& tree, std::span<const double> theta);

/// Trains each tree on its own subsample drawn without replacement, splitting on a uniformly
/// random dimension at a uniformly random threshold. The threshold range is the node's data
/// range on that dimension trimmed so both children keep at least min_leaf points; nodes with
/// fewer than 2*min_leaf points, or no splittable dimension, become leaves.
Forest train_forest(const TrainingSet& data, const ForestParams& params,
                    Exec exec = Exec::parallel);

/// predict() over a batch of row-major points.
std::vector<double> predict_many(const Forest& forest, std::span<const double> points,
                                 Exec exec = Exec::parallel);

inline constexpr int kForestFormatVersion = 1;

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);
std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

}  // namespace fdnc

#endif
