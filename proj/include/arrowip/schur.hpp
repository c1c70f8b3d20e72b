#pragma once

// Arrowhead (bordered block-diagonal) linear solver based on the Schur
// complement of the coupling block.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "arrowip/linalg.hpp"

namespace arrowip {

/// Wall-clock seconds per solver phase, accumulated over a run.
struct PhaseTimes {
  double init = 0.0;
  double kkt_assembly = 0.0;
  double sc_assembly = 0.0;
  double sc_rhs = 0.0;
  double sc_solve = 0.0;
  double local_solve = 0.0;
  double function_eval = 0.0;

  PhaseTimes& operator+=(const PhaseTimes& o);
};

class StructureViolation : public std::runtime_error {
 public:
  StructureViolation(int row, int col, const std::string& what)
      : std::runtime_error(what), row_(row), col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_, col_;
};

/**
 * The permuted system
 *   [ A_0             B_0^T ]
 *   [      ...        ...   ]
 *   [           A_N-1 B^T   ]
 *   [ B_0  ...  B_N-1 C     ]
 * Index lists map local positions back to the original ordering.
 */
struct ArrowheadSystem {
  int dim = 0;
  std::vector<std::vector<int>> block_index;
  std::vector<int> coupling_index;
  std::vector<SparseSym> a;
  std::vector<SparseMatrix> b;  // coupling rows x block columns
  SparseSym c;

  int num_blocks() const { return static_cast<int>(a.size()); }
  int coupling_dim() const { return static_cast<int>(coupling_index.size()); }
  /// Dense expansion in the permuted order (blocks, then coupling).
  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd gather(const Eigen::VectorXd& v, int block) const;
  Eigen::VectorXd gather_coupling(const Eigen::VectorXd& v) const;
};

/// Row labels are block numbers or kCoupling.
ArrowheadSystem permute_to_arrowhead(const SparseSym& matrix, const std::vector<int>& labels,
                                     int num_blocks);

/// Which blocks each worker owns.
struct Partition {
  int workers = 1;
  std::vector<std::vector<int>> assignment;

  /// Contiguous ranges whose sizes differ by at most one block.
  static Partition balanced(int num_blocks, int workers);
};

enum class ScMode { backsolve, augmented };

const char* to_string(ScMode m);

struct SchurOptions {
  ScMode mode = ScMode::backsolve;
  int workers = 1;
  /// Drop block factors after forming S and refactor during solves.
  bool memory_saving = false;
  FactorOptions factor;
};

/// B A^{-1} B^T, optionally handing back the factor of A.
Eigen::MatrixXd local_contribution(const SparseSym& a, const SparseMatrix& b, ScMode mode,
                                   const FactorOptions& options = {},
                                   SymIndefFactor* factor_out = nullptr);

/// Sum of block inertias plus the inertia of S.
Inertia inertia_of(const std::vector<Inertia>& blocks, const Inertia& schur);

/**
 * Factorization of an arrowhead system: per-block factors and contributions
 * computed by a worker pool, reduced in ascending block order into S,
 * followed by a dense factor of S.
 */
class SchurFactorization {
 public:
  static SchurFactorization factor(const ArrowheadSystem& system, const SchurOptions& options,
                                   PhaseTimes* times = nullptr);

  /// Valid even when singular; a singular block reports its zero pivots and
  /// leaves S unformed.
  Inertia inertia() const { return inertia_; }
  bool singular() const { return singular_block_ != -2; }
  /// Block index of the first singular block, -1 for a singular S.
  int singular_block() const { return singular_block_; }

  /// Solves with rhs and result in the original (unpermuted) ordering.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, PhaseTimes* times = nullptr) const;

  const Eigen::MatrixXd& schur_matrix() const { return s_; }
  /// FNV-1a hash of the bits of S.
  std::uint64_t schur_checksum() const;

 private:
  const ArrowheadSystem* system_ = nullptr;
  SchurOptions options_;
  std::vector<std::optional<SymIndefFactor>> blocks_;
  Eigen::MatrixXd s_;
  SymIndefFactor s_factor_;
  Inertia inertia_;
  int singular_block_ = -2;
};

/// Runs fn(block) for every block, each worker walking its own assignment.
template <class Fn>
void run_partitioned(const Partition& partition, Fn&& fn);

std::uint64_t checksum(const Eigen::MatrixXd& m);
std::uint64_t checksum(const Eigen::VectorXd& v);

}  // namespace arrowip

#include <thread>

namespace arrowip {

template <class Fn>
void run_partitioned(const Partition& partition, Fn&& fn) {
  if (partition.workers <= 1) {
    for (const auto& blocks : partition.assignment) {
      for (int b : blocks) fn(b);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(partition.assignment.size());
  for (std::size_t w = 0; w < partition.assignment.size(); ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int b : partition.assignment[w]) fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace arrowip
