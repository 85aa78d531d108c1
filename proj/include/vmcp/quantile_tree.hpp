#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace vmcp {

/// Marker for "below every stored value" (the -inf quantile).
inline constexpr double kBelowAll = std::numeric_limits<double>::lowest();
/// Marker for "above every finite value" (the +inf threshold).
inline constexpr double kAboveAll = std::numeric_limits<double>::max();

/// Weight at or below which a decremented node is dropped.
inline constexpr double kRemovalThreshold = 1e-12;
/// Relative slack accepted when a deletion asks for more weight than stored.
inline constexpr double kWeightTolerance = 1e-9;

/**
 * Exact weighted empirical CDF backed by a red-black tree.
 *
 * Each node is a point mass (value, weight) and additionally caches the
 * total weight of its subtree, so both the quantile function
 *
 *     Q(q) = min { v : sum_{v_i <= v} w_i >= q * W }
 *
 * and the CDF are answered by a single root-to-leaf descent. Weights are
 * kept un-normalized; W is the root's subtree sum. Equal values share one
 * node (bitwise key equality), so deletion decrements that node.
 *
 * Nodes live in a contiguous arena addressed by 32-bit indices; index 0 is
 * the black nil sentinel whose sum is always zero.
 *
 * Not internally synchronized.
 */
class QuantileTree {
 public:
  struct Entry {
    double value;
    double weight;
    double cumulative;
  };

  QuantileTree();

  /// Adds `weight` at `value`. Zero weight is a no-op.
  /// Throws std::invalid_argument for non-finite values or bad weights.
  void insert(double value, double weight);

  /// Removes `weight` from the node at `value`; the node is dropped once its
  /// remaining weight is <= kRemovalThreshold.
  /// Throws KeyNotFoundError or WeightUnderflowError.
  void remove(double value, double weight);

  /// Smallest stored value whose cumulative weight reaches q * total.
  /// q <= 0 yields kBelowAll; q > 1 (or NaN) throws std::invalid_argument;
  /// an empty tree throws EmptyDistributionError.
  double query_quantile(double q) const;

  /// Normalized mass at or below t; 0 for an empty tree.
  double cdf_at(double t) const;

  /// Un-normalized mass at or below t.
  double cumulative_weight(double t) const;

  double total_weight() const noexcept;
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  std::size_t height() const;

  /// Weight stored at exactly `value`, 0 if absent.
  double weight_at(double value) const;

  void clear();

  /// In-order (value, weight, cumulative weight) triples.
  std::vector<Entry> entries() const;

  /// CSV dump of entries() with header `value,weight,cumulative`.
  void write_csv(std::ostream& out) const;

  /// Verifies BST order, red-black shape, parent links, positive weights and
  /// the sum recursion (relative tolerance `sum_tolerance`). Returns an empty
  /// string when valid, otherwise a description of the first violation.
  std::string validate(double sum_tolerance = 1e-9) const;

 private:
  using Index = std::uint32_t;
  static constexpr Index kNil = 0;

  struct Node {
    double value = 0.0;
    double weight = 0.0;
    double sum = 0.0;
    Index left = kNil;
    Index right = kNil;
    Index parent = kNil;
    bool red = false;
  };

  Index allocate(double value, double weight);
  void release(Index x);
  Index find(double value) const;
  Index minimum(Index x) const;

  void refresh_sums_upward(Index x);
  void rotate_left(Index x);
  void rotate_right(Index x);
  void insert_fixup(Index z);
  void transplant(Index u, Index v);
  void erase_node(Index z);
  void erase_fixup(Index x);

  std::vector<Node> nodes_;
  std::vector<Index> free_;
  Index root_ = kNil;
  std::size_t count_ = 0;
};

}  // namespace vmcp
