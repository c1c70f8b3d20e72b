#pragma once

// Sparse symmetric storage and the symmetric indefinite LDL^T kernel used by
// every linear-solver path (direct, Schur-complement, structured MPOPF).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace arrowip {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Counts of positive, negative and zero eigenvalues.
struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;

  int dim() const { return positive + negative + zero; }
  Inertia& operator+=(const Inertia& o) {
    positive += o.positive;
    negative += o.negative;
    zero += o.zero;
    return *this;
  }
  friend Inertia operator+(Inertia a, const Inertia& b) { return a += b; }
  friend bool operator==(const Inertia&, const Inertia&) = default;
};

struct Triplet {
  int row;
  int col;
  double value;
};

/**
 * Symmetric matrix holding its upper triangle in compressed row layout.
 *
 * Column indices within a row are sorted and start with the diagonal, which
 * is always stored (possibly as an explicit zero).
 */
class SparseSym {
 public:
  SparseSym() = default;

  /// Builds from entries of either triangle; duplicates are summed.
  static SparseSym from_triplets(int dim, std::span<const Triplet> entries);
  /// Upper triangle of a dense symmetric matrix, dropping exact zeros
  /// off the diagonal.
  static SparseSym from_dense(const Eigen::MatrixXd& a);

  int dim() const { return dim_; }
  std::size_t nnz() const { return values_.size(); }
  std::span<const int> row_start() const { return row_start_; }
  std::span<const int> col_index() const { return col_index_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Position of (row, col) in values(), or -1 when not stored.
  int find(int row, int col) const;
  double diagonal(int i) const { return values_[row_start_[i]]; }

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  double norm_inf() const;

 private:
  int dim_ = 0;
  std::vector<int> row_start_{0};
  std::vector<int> col_index_;
  std::vector<double> values_;
};

/// General rectangular matrix in compressed row layout.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_start_(rows + 1, 0) {}

  static SparseMatrix from_triplets(int rows, int cols,
                                    std::span<const Triplet> entries);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  std::span<const int> row_start() const { return row_start_; }
  std::span<const int> col_index() const { return col_index_; }
  std::span<const double> values() const { return values_; }

  bool row_empty(int r) const { return row_start_[r] == row_start_[r + 1]; }
  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd multiply_transpose(const Eigen::VectorXd& y) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_start_{0};
  std::vector<int> col_index_;
  std::vector<double> values_;
};

/// Thrown when a solve is attempted against a factor with a zero pivot.
class SingularFactorization : public std::runtime_error {
 public:
  SingularFactorization(int pivot_index, const std::string& what)
      : std::runtime_error(what), pivot_index_(pivot_index) {}
  int pivot_index() const { return pivot_index_; }

 private:
  int pivot_index_;
};

struct FactorOptions {
  /// A pivot counts as zero when it is at most this times the largest entry
  /// produced during elimination (at least 1), or when it lies within the
  /// rounding error estimate carried for its row.
  double zero_pivot_tolerance = 1e-12;
};

/**
 * P A P^T = L D L^T with unit lower L and 1x1/2x2 block-diagonal D.
 *
 * Pivots follow a minimum-degree order; each candidate is accepted or paired
 * by the Bunch-Kaufman test, so growth stays bounded for indefinite input.
 * The matrix is equilibrated first, so the zero-pivot test is relative to
 * unit-scaled rows. The inertia is read off D. Zero pivots are recorded rather than thrown so
 * callers can inspect the inertia of singular matrices; solve() throws on
 * them.
 */
class SymIndefFactor {
 public:
  static SymIndefFactor factor(const SparseSym& a, const FactorOptions& options = {});
  static SymIndefFactor factor_dense(const Eigen::MatrixXd& a,
                                     const FactorOptions& options = {});

  int dim() const { return dim_; }
  Inertia inertia() const { return inertia_; }
  bool singular() const { return first_zero_pivot_ >= 0; }
  int first_zero_pivot() const { return first_zero_pivot_; }
  std::size_t factor_nonzeros() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  void solve_in_place(RowMajorMatrix& rhs) const;

 private:
  friend class Eliminator;
  friend struct AugmentedFactorResult partial_factor_augmented(const SparseSym&,
                                                               const SparseMatrix&,
                                                               const FactorOptions&);
  struct Step {
    int first = -1;
    int second = -1;  // -1 for a 1x1 pivot
    double d11 = 0.0, d21 = 0.0, d22 = 0.0;
    bool zero = false;
    std::vector<int> rows;
    std::vector<double> l1, l2;
  };

  int dim_ = 0;
  Eigen::VectorXd scale_;  // symmetric equilibration applied before elimination
  Inertia inertia_;
  int first_zero_pivot_ = -1;
  std::vector<Step> steps_;
};

struct AugmentedFactorResult {
  /// Factor of the leading block, usable for later solves.
  SymIndefFactor factor;
  /// Dense -B A^{-1} B^T over all border rows (zero rows stay zero).
  Eigen::MatrixXd schur_block;
};

/**
 * Incomplete factorization of [[A, B^T], [B, 0]], stopped once every pivot
 * of A has been eliminated. The trailing block then holds -B A^{-1} B^T.
 * Border rows that are entirely zero are left out of the elimination.
 */
AugmentedFactorResult partial_factor_augmented(const SparseSym& a,
                                               const SparseMatrix& border,
                                               const FactorOptions& options = {});

}  // namespace arrowip
