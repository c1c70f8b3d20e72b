#pragma once

#include <string>
#include <vector>

namespace arrowip {

/// Label used for indices that belong to the coupling (border) part.
inline constexpr int kCoupling = -1;

/**
 * Partition of a problem's indices into independent blocks plus a coupling
 * set. Slack variables carry their own label: a slack normally lives with
 * its constraint row, but a coupling row may own a slack that belongs to a
 * block (the multiperiod storage rows), in which case the slack is kept as
 * an explicit variable of that block.
 */
struct BlockMap {
  int num_blocks = 1;
  std::vector<int> variable;
  std::vector<int> equality;
  std::vector<int> inequality;
  std::vector<int> slack;

  /// Single block, no coupling.
  static BlockMap single(int n_x, int n_e, int n_i);

  /// Empty string when consistent with the given dimensions.
  std::string check(int n_x, int n_e, int n_i) const;
  int coupling_variables() const;
};

}  // namespace arrowip
