#include "vmcp/quantile_tree.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "vmcp/errors.hpp"

namespace vmcp {

QuantileTree::QuantileTree() { nodes_.emplace_back(); }

QuantileTree::Index QuantileTree::allocate(double value, double weight) {
  Index x;
  if (!free_.empty()) {
    x = free_.back();
    free_.pop_back();
  } else {
    nodes_.emplace_back();
    x = static_cast<Index>(nodes_.size() - 1);
  }
  Node& n = nodes_[x];
  n = Node{};
  n.value = value;
  n.weight = weight;
  n.sum = weight;
  n.red = true;
  ++count_;
  return x;
}

void QuantileTree::release(Index x) {
  nodes_[x] = Node{};
  free_.push_back(x);
  --count_;
}

QuantileTree::Index QuantileTree::find(double value) const {
  Index x = root_;
  while (x != kNil) {
    const Node& n = nodes_[x];
    if (value == n.value) return x;
    x = value < n.value ? n.left : n.right;
  }
  return kNil;
}

QuantileTree::Index QuantileTree::minimum(Index x) const {
  while (nodes_[x].left != kNil) x = nodes_[x].left;
  return x;
}

void QuantileTree::refresh_sums_upward(Index x) {
  while (x != kNil) {
    Node& n = nodes_[x];
    n.sum = nodes_[n.left].sum + n.weight + nodes_[n.right].sum;
    x = n.parent;
  }
}

// Rotations recompute the two affected subtree sums before relinking and
// assign them afterwards; the rotated subtree keeps its total, so ancestors
// stay valid.
void QuantileTree::rotate_left(Index x) {
  const Index y = nodes_[x].right;
  const double new_x_sum = nodes_[nodes_[x].left].sum + nodes_[nodes_[y].left].sum + nodes_[x].weight;
  const double new_y_sum = new_x_sum + nodes_[y].weight + nodes_[nodes_[y].right].sum;

  nodes_[x].right = nodes_[y].left;
  if (nodes_[y].left != kNil) nodes_[nodes_[y].left].parent = x;
  nodes_[y].parent = nodes_[x].parent;
  if (nodes_[x].parent == kNil) {
    root_ = y;
  } else if (x == nodes_[nodes_[x].parent].left) {
    nodes_[nodes_[x].parent].left = y;
  } else {
    nodes_[nodes_[x].parent].right = y;
  }
  nodes_[y].left = x;
  nodes_[x].parent = y;

  nodes_[x].sum = new_x_sum;
  nodes_[y].sum = new_y_sum;
}

void QuantileTree::rotate_right(Index x) {
  const Index y = nodes_[x].left;
  const double new_x_sum = nodes_[nodes_[x].right].sum + nodes_[nodes_[y].right].sum + nodes_[x].weight;
  const double new_y_sum = new_x_sum + nodes_[y].weight + nodes_[nodes_[y].left].sum;

  nodes_[x].left = nodes_[y].right;
  if (nodes_[y].right != kNil) nodes_[nodes_[y].right].parent = x;
  nodes_[y].parent = nodes_[x].parent;
  if (nodes_[x].parent == kNil) {
    root_ = y;
  } else if (x == nodes_[nodes_[x].parent].right) {
    nodes_[nodes_[x].parent].right = y;
  } else {
    nodes_[nodes_[x].parent].left = y;
  }
  nodes_[y].right = x;
  nodes_[x].parent = y;

  nodes_[x].sum = new_x_sum;
  nodes_[y].sum = new_y_sum;
}

void QuantileTree::insert(double value, double weight) {
  if (!std::isfinite(value)) throw std::invalid_argument("QuantileTree::insert: non-finite value");
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw std::invalid_argument("QuantileTree::insert: weight must be finite and non-negative");
  if (weight == 0.0) return;

  Index parent = kNil;
  Index x = root_;
  while (x != kNil) {
    Node& n = nodes_[x];
    if (value == n.value) {
      n.weight += weight;
      refresh_sums_upward(x);
      return;
    }
    parent = x;
    x = value < n.value ? n.left : n.right;
  }

  const Index z = allocate(value, weight);
  nodes_[z].parent = parent;
  if (parent == kNil) {
    root_ = z;
  } else if (value < nodes_[parent].value) {
    nodes_[parent].left = z;
  } else {
    nodes_[parent].right = z;
  }
  refresh_sums_upward(parent);
  insert_fixup(z);
}

void QuantileTree::insert_fixup(Index z) {
  while (nodes_[nodes_[z].parent].red) {
    const Index p = nodes_[z].parent;
    const Index g = nodes_[p].parent;
    if (p == nodes_[g].left) {
      const Index uncle = nodes_[g].right;
      if (nodes_[uncle].red) {
        nodes_[p].red = false;
        nodes_[uncle].red = false;
        nodes_[g].red = true;
        z = g;
      } else {
        if (z == nodes_[p].right) {
          z = p;
          rotate_left(z);
        }
        const Index p2 = nodes_[z].parent;
        const Index g2 = nodes_[p2].parent;
        nodes_[p2].red = false;
        nodes_[g2].red = true;
        rotate_right(g2);
      }
    } else {
      const Index uncle = nodes_[g].left;
      if (nodes_[uncle].red) {
        nodes_[p].red = false;
        nodes_[uncle].red = false;
        nodes_[g].red = true;
        z = g;
      } else {
        if (z == nodes_[p].left) {
          z = p;
          rotate_right(z);
        }
        const Index p2 = nodes_[z].parent;
        const Index g2 = nodes_[p2].parent;
        nodes_[p2].red = false;
        nodes_[g2].red = true;
        rotate_left(g2);
      }
    }
  }
  nodes_[root_].red = false;
}

void QuantileTree::remove(double value, double weight) {
  if (!std::isfinite(value)) throw std::invalid_argument("QuantileTree::remove: non-finite value");
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw std::invalid_argument("QuantileTree::remove: weight must be finite and non-negative");

  const Index z = find(value);
  if (z == kNil) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "QuantileTree::remove: no node at value " << value;
    throw KeyNotFoundError(msg.str());
  }
  if (weight == 0.0) return;

  const double stored = nodes_[z].weight;
  if (weight > stored + kWeightTolerance * stored) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "QuantileTree::remove: removing " << weight << " from node holding " << stored;
    throw WeightUnderflowError(msg.str());
  }
  const double remaining = stored - weight;
  if (remaining <= kRemovalThreshold) {
    erase_node(z);
  } else {
    nodes_[z].weight = remaining;
    refresh_sums_upward(z);
  }
}

void QuantileTree::transplant(Index u, Index v) {
  const Index up = nodes_[u].parent;
  if (up == kNil) {
    root_ = v;
  } else if (u == nodes_[up].left) {
    nodes_[up].left = v;
  } else {
    nodes_[up].right = v;
  }
  nodes_[v].parent = up;  // may write the sentinel; erase_fixup relies on it
}

void QuantileTree::erase_node(Index z) {
  Index y = z;
  bool removed_red = nodes_[y].red;
  Index x;
  if (nodes_[z].left == kNil) {
    x = nodes_[z].right;
    transplant(z, nodes_[z].right);
  } else if (nodes_[z].right == kNil) {
    x = nodes_[z].left;
    transplant(z, nodes_[z].left);
  } else {
    y = minimum(nodes_[z].right);
    removed_red = nodes_[y].red;
    x = nodes_[y].right;
    if (nodes_[y].parent == z) {
      nodes_[x].parent = y;
    } else {
      transplant(y, nodes_[y].right);
      nodes_[y].right = nodes_[z].right;
      nodes_[nodes_[y].right].parent = y;
    }
    transplant(z, y);
    nodes_[y].left = nodes_[z].left;
    nodes_[nodes_[y].left].parent = y;
    nodes_[y].red = nodes_[z].red;
  }

  // Every node whose subtree lost z lies on the path from x's parent to the
  // root (y, when moved, is on that path too).
  refresh_sums_upward(nodes_[x].parent);
  if (!removed_red) erase_fixup(x);

  release(z);
  nodes_[kNil].parent = kNil;
  nodes_[kNil].red = false;
}

void QuantileTree::erase_fixup(Index x) {
  while (x != root_ && !nodes_[x].red) {
    const Index p = nodes_[x].parent;
    if (x == nodes_[p].left) {
      Index w = nodes_[p].right;
      if (nodes_[w].red) {
        nodes_[w].red = false;
        nodes_[p].red = true;
        rotate_left(p);
        w = nodes_[p].right;
      }
      if (!nodes_[nodes_[w].left].red && !nodes_[nodes_[w].right].red) {
        nodes_[w].red = true;
        x = p;
      } else {
        if (!nodes_[nodes_[w].right].red) {
          nodes_[nodes_[w].left].red = false;
          nodes_[w].red = true;
          rotate_right(w);
          w = nodes_[p].right;
        }
        nodes_[w].red = nodes_[p].red;
        nodes_[p].red = false;
        nodes_[nodes_[w].right].red = false;
        rotate_left(p);
        x = root_;
      }
    } else {
      Index w = nodes_[p].left;
      if (nodes_[w].red) {
        nodes_[w].red = false;
        nodes_[p].red = true;
        rotate_right(p);
        w = nodes_[p].left;
      }
      if (!nodes_[nodes_[w].right].red && !nodes_[nodes_[w].left].red) {
        nodes_[w].red = true;
        x = p;
      } else {
        if (!nodes_[nodes_[w].left].red) {
          nodes_[nodes_[w].right].red = false;
          nodes_[w].red = true;
          rotate_left(w);
          w = nodes_[p].left;
        }
        nodes_[w].red = nodes_[p].red;
        nodes_[p].red = false;
        nodes_[nodes_[w].left].red = false;
        rotate_right(p);
        x = root_;
      }
    }
  }
  nodes_[x].red = false;
}

double QuantileTree::query_quantile(double q) const {
  if (!(q <= 1.0)) throw std::invalid_argument("QuantileTree::query_quantile: q must be <= 1");
  if (q <= 0.0) return kBelowAll;
  if (root_ == kNil) throw EmptyDistributionError("QuantileTree::query_quantile: empty tree");

  double target = q * nodes_[root_].sum;
  Index x = root_;
  for (;;) {
    const Node& n = nodes_[x];
    const double left = nodes_[n.left].sum;
    if (n.left != kNil && target <= left) {
      x = n.left;
    } else if (target <= left + n.weight || n.right == kNil) {
      // The right-nil fallback absorbs rounding when q * total overshoots.
      return n.value;
    } else {
      target -= left + n.weight;
      x = n.right;
    }
  }
}

double QuantileTree::cumulative_weight(double t) const {
  double acc = 0.0;
  Index x = root_;
  while (x != kNil) {
    const Node& n = nodes_[x];
    if (t < n.value) {
      x = n.left;
    } else {
      acc += nodes_[n.left].sum + n.weight;
      x = n.right;
    }
  }
  return acc;
}

double QuantileTree::cdf_at(double t) const {
  if (root_ == kNil) return 0.0;
  const double total = nodes_[root_].sum;
  if (total <= 0.0) return 0.0;
  return std::min(1.0, cumulative_weight(t) / total);
}

double QuantileTree::total_weight() const noexcept { return nodes_[root_].sum; }

double QuantileTree::weight_at(double value) const {
  const Index x = find(value);
  return x == kNil ? 0.0 : nodes_[x].weight;
}

std::size_t QuantileTree::height() const {
  // Iterative level walk; red-black depth keeps the frontier small.
  std::size_t h = 0;
  std::vector<Index> level;
  if (root_ != kNil) level.push_back(root_);
  std::vector<Index> next;
  while (!level.empty()) {
    ++h;
    next.clear();
    for (Index x : level) {
      if (nodes_[x].left != kNil) next.push_back(nodes_[x].left);
      if (nodes_[x].right != kNil) next.push_back(nodes_[x].right);
    }
    level.swap(next);
  }
  return h;
}

void QuantileTree::clear() {
  nodes_.resize(1);
  nodes_[kNil] = Node{};
  free_.clear();
  root_ = kNil;
  count_ = 0;
}

std::vector<QuantileTree::Entry> QuantileTree::entries() const {
  std::vector<Entry> out;
  out.reserve(count_);
  std::vector<Index> stack;
  Index x = root_;
  double cumulative = 0.0;
  while (x != kNil || !stack.empty()) {
    while (x != kNil) {
      stack.push_back(x);
      x = nodes_[x].left;
    }
    x = stack.back();
    stack.pop_back();
    cumulative += nodes_[x].weight;
    out.push_back({nodes_[x].value, nodes_[x].weight, cumulative});
    x = nodes_[x].right;
  }
  return out;
}

void QuantileTree::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "value,weight,cumulative\n";
  for (const Entry& e : entries()) out << e.value << ',' << e.weight << ',' << e.cumulative << '\n';
  out.precision(old_precision);
}

std::string QuantileTree::validate(double sum_tolerance) const {
  std::ostringstream err;
  err.precision(17);
  if (nodes_[kNil].red || nodes_[kNil].sum != 0.0) return "sentinel corrupted";
  if (root_ != kNil && nodes_[root_].red) return "root is red";
  if (root_ != kNil && nodes_[root_].parent != kNil) return "root has a parent";

  std::size_t seen = 0;
  // Returns black height, or -1 on violation (message left in err).
  auto check = [&](auto&& self, Index x, const double* lo, const double* hi) -> int {
    if (x == kNil) return 1;
    const Node& n = nodes_[x];
    ++seen;
    if ((lo && !(n.value > *lo)) || (hi && !(n.value < *hi))) {
      err << "BST order violated at value " << n.value;
      return -1;
    }
    if (!(n.weight > 0.0)) {
      err << "non-positive weight at value " << n.value;
      return -1;
    }
    if (n.left != kNil && nodes_[n.left].parent != x) {
      err << "broken parent link below value " << n.value;
      return -1;
    }
    if (n.right != kNil && nodes_[n.right].parent != x) {
      err << "broken parent link below value " << n.value;
      return -1;
    }
    if (n.red && (nodes_[n.left].red || nodes_[n.right].red)) {
      err << "red node with red child at value " << n.value;
      return -1;
    }
    const double expected = nodes_[n.left].sum + n.weight + nodes_[n.right].sum;
    if (std::abs(n.sum - expected) > sum_tolerance * std::max(1.0, std::abs(expected))) {
      err << "sum recursion violated at value " << n.value << ": " << n.sum << " vs " << expected;
      return -1;
    }
    const int lh = self(self, n.left, lo, &n.value);
    if (lh < 0) return -1;
    const int rh = self(self, n.right, &n.value, hi);
    if (rh < 0) return -1;
    if (lh != rh) {
      err << "black height mismatch at value " << n.value;
      return -1;
    }
    return lh + (n.red ? 0 : 1);
  };
  if (check(check, root_, nullptr, nullptr) < 0) return err.str();
  if (seen != count_) return "node count mismatch";
  return {};
}

}  // namespace vmcp
