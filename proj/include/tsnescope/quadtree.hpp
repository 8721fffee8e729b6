#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "tsnescope/matrix.hpp"

namespace tsnescope::detail {

// Point-region quadtree over a 2-D embedding for Barnes-Hut repulsion.
// Leaves hold one distinct location; coincident points (or points past the
// depth limit) share a leaf and are evaluated exactly.
class QuadTree {
 public:
  explicit QuadTree(const Matrix& coords) : coords_(coords) {
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      min_x = std::min(min_x, coords(i, 0));
      max_x = std::max(max_x, coords(i, 0));
      min_y = std::min(min_y, coords(i, 1));
      max_y = std::max(max_y, coords(i, 1));
    }
    const double half = std::max({max_x - min_x, max_y - min_y, 1e-12}) * 0.5 + 1e-5;
    root_ = std::make_unique<Node>(0.5 * (min_x + max_x), 0.5 * (min_y + max_y), half);
    for (std::size_t i = 0; i < coords.rows(); ++i) insert(*root_, i, 0);
  }

  // Accumulates sum_j w_ij and sum_j w_ij^2 (y_i - y_j) over j != i.
  void repulsion(std::size_t i, double theta, double& sum_w, double& force_x, double& force_y) const {
    visit(*root_, i, theta * theta, sum_w, force_x, force_y);
  }

 private:
  static constexpr int max_depth = 48;

  struct Node {
    Node(double cx, double cy, double h) : center_x(cx), center_y(cy), half(h) {}
    double center_x, center_y, half;
    double mass_x = 0.0, mass_y = 0.0;  // running sums of member coordinates
    std::size_t count = 0;
    std::vector<std::size_t> members;  // leaf only
    std::array<std::unique_ptr<Node>, 4> children;
    bool leaf() const { return !children[0]; }
  };

  void insert(Node& node, std::size_t i, int depth) {
    const double x = coords_(i, 0), y = coords_(i, 1);
    node.mass_x += x;
    node.mass_y += y;
    ++node.count;
    if (node.leaf()) {
      if (node.members.empty() || depth >= max_depth ||
          (coords_(node.members[0], 0) == x && coords_(node.members[0], 1) == y)) {
        node.members.push_back(i);
        return;
      }
      subdivide(node);
      const auto moved = std::move(node.members);
      node.members.clear();
      for (std::size_t m : moved) insert(child_for(node, m), m, depth + 1);
    }
    insert(child_for(node, i), i, depth + 1);
  }

  // Children's mass is rebuilt from the members pushed back down.
  void subdivide(Node& node) {
    const double h = node.half * 0.5;
    for (int q = 0; q < 4; ++q) {
      const double cx = node.center_x + ((q & 1) ? h : -h);
      const double cy = node.center_y + ((q & 2) ? h : -h);
      node.children[q] = std::make_unique<Node>(cx, cy, h);
    }
  }

  Node& child_for(Node& node, std::size_t i) const {
    const int q = (coords_(i, 0) >= node.center_x ? 1 : 0) | (coords_(i, 1) >= node.center_y ? 2 : 0);
    return *node.children[q];
  }

  void visit(const Node& node, std::size_t i, double theta_sq, double& sum_w, double& fx, double& fy) const {
    if (node.count == 0) return;
    const double xi = coords_(i, 0), yi = coords_(i, 1);
    if (node.leaf()) {
      for (std::size_t j : node.members) {
        if (j == i) continue;
        const double dx = xi - coords_(j, 0), dy = yi - coords_(j, 1);
        const double w = 1.0 / (1.0 + dx * dx + dy * dy);
        sum_w += w;
        fx += w * w * dx;
        fy += w * w * dy;
      }
      return;
    }
    const double inv = 1.0 / static_cast<double>(node.count);
    const double dx = xi - node.mass_x * inv, dy = yi - node.mass_y * inv;
    const double dist_sq = dx * dx + dy * dy;
    const double width = 2.0 * node.half;
    // width / dist < theta, compared squared
    const bool holds_i = std::abs(xi - node.center_x) <= node.half && std::abs(yi - node.center_y) <= node.half;
    if (!holds_i && width * width < theta_sq * dist_sq) {
      const double w = 1.0 / (1.0 + dist_sq);
      const double m = static_cast<double>(node.count);
      sum_w += m * w;
      fx += m * w * w * dx;
      fy += m * w * w * dy;
      return;
    }
    for (const auto& child : node.children) visit(*child, i, theta_sq, sum_w, fx, fy);
  }

  const Matrix& coords_;
  std::unique_ptr<Node> root_;
};

}  // namespace tsnescope::detail
