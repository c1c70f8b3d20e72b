#pragma once

// Schur path specialized to multiperiod coupling, where every period block
// borders the coupling rows of its own and all later periods through two
// constant matrices:
//   B_n = [ 0 ... 0 | C_1 | C_0 ... C_0 ]^T   (row blocks k < n, k = n, k > n)
// The global Schur complement then has identical sub-diagonal blocks in
// every column, which the compressed storage and block factorization exploit.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "arrowip/linalg.hpp"
#include "arrowip/schur.hpp"

namespace arrowip {

/**
 * Distinct blocks of the period contribution S_ij,n = -C_i A_n^{-1} C_j^T:
 * s11 (own row), s10 (later row against own row, -C_0 A^{-1} C_1^T) and
 * s00 (two later rows).
 */
struct ReplicatedScBlock {
  Eigen::MatrixXd s11, s10, s00;
};

ReplicatedScBlock replicated_contribution(const SymIndefFactor& a_factor, const Eigen::MatrixXd& c0,
                                          const Eigen::MatrixXd& c1);
ReplicatedScBlock replicated_contribution(const SparseSym& a, const Eigen::MatrixXd& c0,
                                          const Eigen::MatrixXd& c1,
                                          const FactorOptions& options = {});

/// Dense replicated contribution of period n in an N-period horizon.
Eigen::MatrixXd expand_contribution(const ReplicatedScBlock& block, int n, int num_periods);

/**
 * Global Schur complement held as N diagonal blocks and N-1 column blocks;
 * every block below the diagonal in column j equals off[j].
 */
struct CompressedSc {
  int num_periods = 0;
  int block_size = 0;
  std::vector<Eigen::MatrixXd> diag;
  std::vector<Eigen::MatrixXd> off;

  std::size_t stored_values() const;
  Eigen::MatrixXd expand() const;
};

/// corner_diag[k] is the (k,k) block of the corner; off-diagonal corner
/// blocks must be zero.
CompressedSc accumulate_global(const std::vector<ReplicatedScBlock>& contributions,
                               const std::vector<Eigen::MatrixXd>& corner_diag);

/**
 * Block LDL^T of an expanded CompressedSc. Column k eliminates pivot block
 * P_k with multiplier L_k = off[k] P_k^{-1} shared by all rows below; the
 * single update block off[k] P_k^{-1} off[k]^T is subtracted from every
 * trailing block.
 */
class StructuredFactor {
 public:
  static StructuredFactor factorize(CompressedSc sc, const FactorOptions& options = {});

  Inertia inertia() const { return inertia_; }
  bool singular() const { return singular_pivot_ >= 0; }
  int singular_pivot() const { return singular_pivot_; }
  /// Block operations (factor, solve, multiply, add) spent in factorize().
  std::int64_t factor_operations() const { return factor_ops_; }
  /// Block operations spent in the most recent solve().
  std::int64_t solve_operations() const { return solve_ops_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  int n_ = 0, ns_ = 0;
  std::vector<SymIndefFactor> pivots_;
  std::vector<Eigen::MatrixXd> multipliers_;
  Inertia inertia_;
  int singular_pivot_ = -1;
  std::int64_t factor_ops_ = 0;
  mutable std::int64_t solve_ops_ = 0;
};

/**
 * Arrowhead factorization for multiperiod systems: block n is period n and
 * the coupling rows are ordered period-major with block_size rows each.
 * Throws StructureViolation when the borders are not replicated.
 */
class StructuredSchurFactorization {
 public:
  static StructuredSchurFactorization factor(const ArrowheadSystem& system,
                                             const SchurOptions& options,
                                             PhaseTimes* times = nullptr);

  Inertia inertia() const { return inertia_; }
  bool singular() const { return singular_block_ != -2; }
  int singular_block() const { return singular_block_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, PhaseTimes* times = nullptr) const;
  const CompressedSc& compressed() const { return compressed_; }
  std::uint64_t schur_checksum() const;

 private:
  const ArrowheadSystem* system_ = nullptr;
  SchurOptions options_;
  int ns_ = 0;
  std::vector<Eigen::MatrixXd> c0_, c1_;
  std::vector<std::optional<SymIndefFactor>> blocks_;
  CompressedSc compressed_;
  std::optional<StructuredFactor> factor_;
  Inertia inertia_;
  int singular_block_ = -2;
};

}  // namespace arrowip
