#include "arrowip/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <set>
#include <utility>

namespace arrowip {

// ---------------------------------------------------------------------------
// SparseSym

SparseSym SparseSym::from_triplets(int dim, std::span<const Triplet> entries) {
  std::vector<Triplet> upper;
  upper.reserve(entries.size() + dim);
  for (const auto& t : entries) {
    if (t.row < 0 || t.col < 0 || t.row >= dim || t.col >= dim) {
      throw std::out_of_range("SparseSym: triplet index out of range");
    }
    upper.push_back({std::min(t.row, t.col), std::max(t.row, t.col), t.value});
  }
  for (int i = 0; i < dim; ++i) upper.push_back({i, i, 0.0});
  std::stable_sort(upper.begin(), upper.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseSym m;
  m.dim_ = dim;
  m.row_start_.assign(dim + 1, 0);
  for (std::size_t k = 0; k < upper.size(); ++k) {
    const auto& t = upper[k];
    if (!m.col_index_.empty() && k > 0 && upper[k - 1].row == t.row &&
        upper[k - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_index_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_start_[t.row + 1];
  }
  for (int i = 0; i < dim; ++i) m.row_start_[i + 1] += m.row_start_[i];
  return m;
}

SparseSym SparseSym::from_dense(const Eigen::MatrixXd& a) {
  std::vector<Triplet> t;
  const int n = static_cast<int>(a.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (i == j || a(i, j) != 0.0) t.push_back({i, j, a(i, j)});
    }
  }
  return from_triplets(n, t);
}

int SparseSym::find(int row, int col) const {
  if (row > col) std::swap(row, col);
  const auto first = col_index_.begin() + row_start_[row];
  const auto last = col_index_.begin() + row_start_[row + 1];
  const auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return -1;
  return static_cast<int>(it - col_index_.begin());
}

Eigen::MatrixXd SparseSym::to_dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) {
      a(i, col_index_[k]) = values_[k];
      a(col_index_[k], i) = values_[k];
    }
  }
  return a;
}

Eigen::VectorXd SparseSym::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) {
      const int j = col_index_[k];
      y[i] += values_[k] * x[j];
      if (j != i) y[j] += values_[k] * x[i];
    }
  }
  return y;
}

double SparseSym::norm_inf() const {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) {
      const int j = col_index_[k];
      rows[i] += std::abs(values_[k]);
      if (j != i) rows[j] += std::abs(values_[k]);
    }
  }
  return dim_ == 0 ? 0.0 : rows.maxCoeff();
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix SparseMatrix::from_triplets(int rows, int cols,
                                         std::span<const Triplet> entries) {
  std::vector<Triplet> sorted(entries.begin(), entries.end());
  for (const auto& t : sorted) {
    if (t.row < 0 || t.col < 0 || t.row >= rows || t.col >= cols) {
      throw std::out_of_range("SparseMatrix: triplet index out of range");
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& t = sorted[k];
    if (k > 0 && sorted[k - 1].row == t.row && sorted[k - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_index_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_start_[t.row + 1];
  }
  for (int i = 0; i < rows; ++i) m.row_start_[i + 1] += m.row_start_[i];
  return m;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) a(i, col_index_[k]) += values_[k];
  }
  return a;
}

Eigen::VectorXd SparseMatrix::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) y[i] += values_[k] * x[col_index_[k]];
  }
  return y;
}

Eigen::VectorXd SparseMatrix::multiply_transpose(const Eigen::VectorXd& y) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) x[col_index_[k]] += values_[k] * y[i];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Elimination engine

namespace {
// Bunch-Kaufman growth constant (1 + sqrt(17)) / 8.
const double kBunchKaufmanAlpha = (1.0 + std::sqrt(17.0)) / 8.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kErrSafety = 10.0;
}  // namespace

/**
 * Right-looking sparse symmetric elimination over an active submatrix held
 * as sorted adjacency rows (both triangles, diagonal included). Only the
 * first `candidates` indices are ever chosen as pivots.
 */
class Eliminator {
 public:
  using Row = std::vector<std::pair<int, double>>;

  Eliminator(int n, int candidates, double tol)
      : n_(n), candidates_(candidates), tol_(tol), rows_(n), err_(n, 0.0), active_(n, 1),
        degree_(n, 0) {}

  void insert(int i, int j, double v) {
    rows_[i].emplace_back(j, v);
    if (i != j) rows_[j].emplace_back(i, v);
  }

  void finalize_rows() {
    for (int i = 0; i < n_; ++i) {
      rows_[i].emplace_back(i, 0.0);
      auto& r = rows_[i];
      std::stable_sort(r.begin(), r.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      Row merged;
      merged.reserve(r.size());
      for (const auto& e : r) {
        if (!merged.empty() && merged.back().first == e.first) {
          merged.back().second += e.second;
        } else {
          merged.push_back(e);
        }
      }
      r = std::move(merged);
      err_[i] = kEps * max_abs(r);
    }
    for (int i = 0; i < candidates_; ++i) {
      degree_[i] = static_cast<int>(rows_[i].size()) - 1;
      queue_.emplace(degree_[i], i);
    }
  }

  void run(SymIndefFactor& out) {
    out.dim_ = candidates_;
    while (!queue_.empty()) {
      const int p = queue_.begin()->second;
      const double app = diag(p);
      const auto [lambda, r] = max_offdiag(p, -1);
      const double tol = std::max(tol_ * growth_, kErrSafety * err_[p]);
      if (lambda <= tol) {
        if (std::abs(app) <= tol) {
          zero_pivot(p, out);
        } else {
          pivot_1x1(p, out);
        }
        continue;
      }
      if (std::abs(app) >= kBunchKaufmanAlpha * lambda) {
        pivot_1x1(p, out);
        continue;
      }
      const auto [sigma, unused] = max_offdiag(r, -1);
      (void)unused;
      if (std::abs(app) * sigma >= kBunchKaufmanAlpha * lambda * lambda) {
        pivot_1x1(p, out);
      } else if (std::abs(diag(r)) >= kBunchKaufmanAlpha * sigma) {
        pivot_1x1(r, out);
      } else {
        pivot_2x2(p, r, out);
      }
    }
  }

  /// Dense remaining submatrix over indices [first, first + count).
  Eigen::MatrixXd trailing(int first, int count) const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(count, count);
    for (int i = first; i < first + count; ++i) {
      if (!active_[i]) continue;
      for (const auto& [j, v] : rows_[i]) {
        if (j >= first && j < first + count) s(i - first, j - first) = v;
      }
    }
    return s;
  }

 private:
  double diag(int i) const {
    const auto& r = rows_[i];
    const auto it = std::lower_bound(r.begin(), r.end(), i,
                                     [](const auto& e, int c) { return e.first < c; });
    return (it != r.end() && it->first == i) ? it->second : 0.0;
  }

  /// Largest |a_ij| over candidate columns j != i, j != skip.
  std::pair<double, int> max_offdiag(int i, int skip) const {
    double best = 0.0;
    int arg = -1;
    for (const auto& [j, v] : rows_[i]) {
      if (j == i || j == skip || j >= candidates_) continue;
      if (std::abs(v) > best) {
        best = std::abs(v);
        arg = j;
      }
    }
    return {best, arg};
  }

  void retire(int p) {
    active_[p] = 0;
    if (p < candidates_) queue_.erase({degree_[p], p});
  }

  void refresh_degree(int i) {
    if (i >= candidates_ || !active_[i]) return;
    const int d = static_cast<int>(rows_[i].size()) - 1;
    if (d == degree_[i]) return;
    queue_.erase({degree_[i], i});
    degree_[i] = d;
    queue_.emplace(d, i);
  }

  static void erase_entry(Row& r, int j) {
    const auto it = std::lower_bound(r.begin(), r.end(), j,
                                     [](const auto& e, int c) { return e.first < c; });
    if (it != r.end() && it->first == j) r.erase(it);
  }

  /// row_i -= coeff * row_src over entries not in `skip`.
  static Row merge_update(const Row& row_i, const Row& row_src, double coeff, int skip_a,
                          int skip_b) {
    Row out;
    out.reserve(row_i.size() + row_src.size());
    std::size_t a = 0, b = 0;
    while (a < row_i.size() || b < row_src.size()) {
      const int ja = a < row_i.size() ? row_i[a].first : INT32_MAX;
      const int jb = b < row_src.size() ? row_src[b].first : INT32_MAX;
      if (jb == skip_a || jb == skip_b) {
        ++b;
        continue;
      }
      if (ja < jb) {
        out.push_back(row_i[a++]);
      } else if (jb < ja) {
        out.emplace_back(jb, -coeff * row_src[b++].second);
      } else {
        out.emplace_back(ja, row_i[a].second - coeff * row_src[b].second);
        ++a;
        ++b;
      }
    }
    return out;
  }

  static double max_abs(const Row& row, int skip_a = -1, int skip_b = -1) {
    double m = 0.0;
    for (const auto& [j, v] : row) {
      if (j != skip_a && j != skip_b) m = std::max(m, std::abs(v));
    }
    return m;
  }

  /// Row i received an update with multiplier magnitude l from pivot rows
  /// whose entries carry error e; amp bounds the pivot-inverse amplification.
  void propagate(int i, double l, double e, double amp) {
    const double m = max_abs(rows_[i]);
    growth_ = std::max(growth_, m);
    err_[i] = std::max(err_[i], l * e * (1.0 + amp)) + kEps * m;
  }

  void zero_pivot(int p, SymIndefFactor& out) {
    retire(p);
    SymIndefFactor::Step step;
    step.first = p;
    step.zero = true;
    for (const auto& [i, v] : rows_[p]) {
      if (i == p) continue;
      erase_entry(rows_[i], p);
      refresh_degree(i);
    }
    rows_[p].clear();
    ++out.inertia_.zero;
    if (out.first_zero_pivot_ < 0) out.first_zero_pivot_ = p;
    out.steps_.push_back(std::move(step));
  }

  void pivot_1x1(int p, SymIndefFactor& out) {
    retire(p);
    const Row rp = std::move(rows_[p]);
    rows_[p].clear();
    double d = 0.0;
    for (const auto& [j, v] : rp) {
      if (j == p) d = v;
    }
    const double amp = max_abs(rp, p) / std::abs(d);
    SymIndefFactor::Step step;
    step.first = p;
    step.d11 = d;
    for (const auto& [i, v] : rp) {
      if (i == p) continue;
      const double l = v / d;
      step.rows.push_back(i);
      step.l1.push_back(l);
      rows_[i] = merge_update(rows_[i], rp, l, p, p);
      erase_entry(rows_[i], p);
      propagate(i, std::abs(l), err_[p], amp);
    }
    for (int i : step.rows) refresh_degree(i);
    if (d > 0) {
      ++out.inertia_.positive;
    } else {
      ++out.inertia_.negative;
    }
    out.steps_.push_back(std::move(step));
  }

  void pivot_2x2(int p, int r, SymIndefFactor& out) {
    retire(p);
    retire(r);
    const Row rp = std::move(rows_[p]);
    const Row rr = std::move(rows_[r]);
    rows_[p].clear();
    rows_[r].clear();
    auto value = [](const Row& row, int j) {
      for (const auto& [c, v] : row) {
        if (c == j) return v;
      }
      return 0.0;
    };
    const double d11 = value(rp, p), d21 = value(rp, r), d22 = value(rr, r);
    const double det = d11 * d22 - d21 * d21;
    const double amp = std::max(max_abs(rp, p, r), max_abs(rr, p, r)) *
                       (std::abs(d11) + std::abs(d22) + 2 * std::abs(d21)) / std::abs(det);
    const double e = std::max(err_[p], err_[r]);

    std::vector<int> touched;
    for (const auto& [i, v] : rp) {
      if (i != p && i != r) touched.push_back(i);
    }
    for (const auto& [i, v] : rr) {
      if (i != p && i != r) touched.push_back(i);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    SymIndefFactor::Step step;
    step.first = p;
    step.second = r;
    step.d11 = d11;
    step.d21 = d21;
    step.d22 = d22;
    for (int i : touched) {
      const double a_ip = value(rp, i), a_ir = value(rr, i);
      const double l1 = (d22 * a_ip - d21 * a_ir) / det;
      const double l2 = (d11 * a_ir - d21 * a_ip) / det;
      step.rows.push_back(i);
      step.l1.push_back(l1);
      step.l2.push_back(l2);
      Row updated = merge_update(rows_[i], rp, l1, p, r);
      rows_[i] = merge_update(updated, rr, l2, p, r);
      erase_entry(rows_[i], p);
      erase_entry(rows_[i], r);
      propagate(i, std::abs(l1) + std::abs(l2), e, amp);
    }
    for (int i : touched) refresh_degree(i);

    if (det < 0) {
      ++out.inertia_.positive;
      ++out.inertia_.negative;
    } else if (d11 + d22 > 0) {
      out.inertia_.positive += 2;
    } else {
      out.inertia_.negative += 2;
    }
    out.steps_.push_back(std::move(step));
  }

  int n_;
  int candidates_;
  double tol_;
  double growth_ = 1.0;  // largest entry magnitude produced so far
  std::vector<Row> rows_;
  std::vector<double> err_;  // rounding error estimate per row
  std::vector<char> active_;
  std::vector<int> degree_;
  std::set<std::pair<int, int>> queue_;
};

// ---------------------------------------------------------------------------
// SymIndefFactor

namespace {

/// Symmetric Ruiz equilibration: diag(d) A diag(d) has rows of max-norm near
/// one. Congruence by a positive diagonal leaves the inertia unchanged.
Eigen::VectorXd equilibrate(const SparseSym& a, int rounds = 3) {
  const int n = a.dim();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  const auto rs = a.row_start();
  const auto ci = a.col_index();
  const auto va = a.values();
  Eigen::VectorXd row_max(n);
  for (int round = 0; round < rounds; ++round) {
    row_max.setZero();
    for (int i = 0; i < n; ++i) {
      for (int k = rs[i]; k < rs[i + 1]; ++k) {
        const int j = ci[k];
        const double v = std::abs(d[i] * va[k] * d[j]);
        row_max[i] = std::max(row_max[i], v);
        row_max[j] = std::max(row_max[j], v);
      }
    }
    for (int i = 0; i < n; ++i) {
      if (row_max[i] > 0 && std::isfinite(row_max[i])) d[i] /= std::sqrt(row_max[i]);
    }
  }
  return d;
}

void insert_scaled(Eliminator& elim, const SparseSym& a, const Eigen::VectorXd& d) {
  const auto rs = a.row_start();
  const auto ci = a.col_index();
  const auto va = a.values();
  for (int i = 0; i < a.dim(); ++i) {
    for (int k = rs[i]; k < rs[i + 1]; ++k) elim.insert(i, ci[k], d[i] * va[k] * d[ci[k]]);
  }
}

}  // namespace

SymIndefFactor SymIndefFactor::factor(const SparseSym& a, const FactorOptions& options) {
  const Eigen::VectorXd d = equilibrate(a);
  Eliminator elim(a.dim(), a.dim(), options.zero_pivot_tolerance);
  insert_scaled(elim, a, d);
  elim.finalize_rows();
  SymIndefFactor f;
  f.scale_ = d;
  elim.run(f);
  return f;
}

SymIndefFactor SymIndefFactor::factor_dense(const Eigen::MatrixXd& a,
                                            const FactorOptions& options) {
  return factor(SparseSym::from_dense(a), options);
}

std::size_t SymIndefFactor::factor_nonzeros() const {
  std::size_t n = 0;
  for (const auto& s : steps_) n += s.rows.size() * (s.second >= 0 ? 2 : 1);
  return n;
}

void SymIndefFactor::solve_in_place(RowMajorMatrix& y) const {
  if (y.rows() != dim_) throw std::invalid_argument("SymIndefFactor::solve: dimension mismatch");
  if (singular()) {
    throw SingularFactorization(first_zero_pivot_,
                                "singular factorization: zero pivot at index " +
                                    std::to_string(first_zero_pivot_));
  }
  for (int i = 0; i < dim_; ++i) y.row(i) *= scale_[i];
  for (const auto& s : steps_) {
    for (std::size_t k = 0; k < s.rows.size(); ++k) {
      const int i = s.rows[k];
      if (i >= dim_) continue;
      y.row(i) -= s.l1[k] * y.row(s.first);
      if (s.second >= 0) y.row(i) -= s.l2[k] * y.row(s.second);
    }
  }
  for (const auto& s : steps_) {
    if (s.second < 0) {
      y.row(s.first) /= s.d11;
    } else {
      const double det = s.d11 * s.d22 - s.d21 * s.d21;
      const Eigen::RowVectorXd a = y.row(s.first), b = y.row(s.second);
      y.row(s.first) = (s.d22 * a - s.d21 * b) / det;
      y.row(s.second) = (s.d11 * b - s.d21 * a) / det;
    }
  }
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    const auto& s = *it;
    for (std::size_t k = 0; k < s.rows.size(); ++k) {
      const int i = s.rows[k];
      if (i >= dim_) continue;
      y.row(s.first) -= s.l1[k] * y.row(i);
      if (s.second >= 0) y.row(s.second) -= s.l2[k] * y.row(i);
    }
  }
  for (int i = 0; i < dim_; ++i) y.row(i) *= scale_[i];
}

Eigen::MatrixXd SymIndefFactor::solve(const Eigen::MatrixXd& rhs) const {
  RowMajorMatrix y = rhs;
  solve_in_place(y);
  return y;
}

Eigen::VectorXd SymIndefFactor::solve(const Eigen::VectorXd& rhs) const {
  RowMajorMatrix y = rhs;
  solve_in_place(y);
  return y.col(0);
}

// ---------------------------------------------------------------------------

AugmentedFactorResult partial_factor_augmented(const SparseSym& a, const SparseMatrix& border,
                                               const FactorOptions& options) {
  if (border.cols() != a.dim()) {
    throw std::invalid_argument("partial_factor_augmented: border column count mismatch");
  }
  const int n = a.dim();
  std::vector<int> live;  // border rows with at least one entry
  for (int r = 0; r < border.rows(); ++r) {
    if (!border.row_empty(r)) live.push_back(r);
  }
  const int m = static_cast<int>(live.size());

  // Scaling only the leading block keeps the trailing block equal to
  // -B A^{-1} B^T.
  const Eigen::VectorXd d = equilibrate(a);
  Eliminator elim(n + m, n, options.zero_pivot_tolerance);
  {
    insert_scaled(elim, a, d);
    const auto brs = border.row_start();
    const auto bci = border.col_index();
    const auto bva = border.values();
    for (int q = 0; q < m; ++q) {
      const int r = live[q];
      for (int k = brs[r]; k < brs[r + 1]; ++k) elim.insert(n + q, bci[k], bva[k] * d[bci[k]]);
    }
  }
  elim.finalize_rows();

  AugmentedFactorResult result;
  result.factor.scale_ = d;
  elim.run(result.factor);
  if (result.factor.singular()) {
    throw SingularFactorization(result.factor.first_zero_pivot(),
                                "partial_factor_augmented: zero pivot in leading block at index " +
                                    std::to_string(result.factor.first_zero_pivot()));
  }
  const Eigen::MatrixXd live_block = elim.trailing(n, m);
  result.schur_block = Eigen::MatrixXd::Zero(border.rows(), border.rows());
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) result.schur_block(live[p], live[q]) = live_block(p, q);
  }
  return result;
}

}  // namespace arrowip
