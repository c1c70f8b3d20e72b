#include "arrowip/schur.hpp"

#include <chrono>
#include <cstring>

#include "arrowip/block_map.hpp"

namespace arrowip {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

PhaseTimes& PhaseTimes::operator+=(const PhaseTimes& o) {
  init += o.init;
  kkt_assembly += o.kkt_assembly;
  sc_assembly += o.sc_assembly;
  sc_rhs += o.sc_rhs;
  sc_solve += o.sc_solve;
  local_solve += o.local_solve;
  function_eval += o.function_eval;
  return *this;
}

const char* to_string(ScMode m) { return m == ScMode::backsolve ? "backsolve" : "augmented"; }

// ---------------------------------------------------------------------------
// Permutation

ArrowheadSystem permute_to_arrowhead(const SparseSym& m, const std::vector<int>& labels,
                                     int num_blocks) {
  const int n = m.dim();
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("permute_to_arrowhead: label count mismatch");
  }
  ArrowheadSystem sys;
  sys.dim = n;
  sys.block_index.resize(num_blocks);
  std::vector<int> local(n);
  for (int i = 0; i < n; ++i) {
    const int l = labels[i];
    if (l == kCoupling) {
      local[i] = static_cast<int>(sys.coupling_index.size());
      sys.coupling_index.push_back(i);
    } else if (l >= 0 && l < num_blocks) {
      local[i] = static_cast<int>(sys.block_index[l].size());
      sys.block_index[l].push_back(i);
    } else {
      throw std::invalid_argument("permute_to_arrowhead: label out of range at row " +
                                  std::to_string(i));
    }
  }
  const int nc = sys.coupling_dim();
  std::vector<std::vector<Triplet>> ta(num_blocks), tb(num_blocks);
  std::vector<Triplet> tc;
  const auto rs = m.row_start();
  const auto ci = m.col_index();
  const auto va = m.values();
  for (int i = 0; i < n; ++i) {
    for (int p = rs[i]; p < rs[i + 1]; ++p) {
      const int j = ci[p];
      const int li = labels[i], lj = labels[j];
      if (li == kCoupling && lj == kCoupling) {
        tc.push_back({local[i], local[j], va[p]});
      } else if (li == kCoupling) {
        tb[lj].push_back({local[i], local[j], va[p]});
      } else if (lj == kCoupling) {
        tb[li].push_back({local[j], local[i], va[p]});
      } else if (li == lj) {
        ta[li].push_back({local[i], local[j], va[p]});
      } else if (va[p] != 0.0) {
        throw StructureViolation(i, j, "structure violation: entry (" + std::to_string(i) +
                                           ", " + std::to_string(j) + ") links blocks " +
                                           std::to_string(li) + " and " + std::to_string(lj));
      }
    }
  }
  for (int k = 0; k < num_blocks; ++k) {
    const int nk = static_cast<int>(sys.block_index[k].size());
    sys.a.push_back(SparseSym::from_triplets(nk, ta[k]));
    sys.b.push_back(SparseMatrix::from_triplets(nc, nk, tb[k]));
  }
  sys.c = SparseSym::from_triplets(nc, tc);
  return sys;
}

Eigen::MatrixXd ArrowheadSystem::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim, dim);
  int off = 0;
  const int nc = coupling_dim();
  const int cpos = dim - nc;
  for (int k = 0; k < num_blocks(); ++k) {
    const int nk = a[k].dim();
    d.block(off, off, nk, nk) = a[k].to_dense();
    const Eigen::MatrixXd bk = b[k].to_dense();
    d.block(cpos, off, nc, nk) = bk;
    d.block(off, cpos, nk, nc) = bk.transpose();
    off += nk;
  }
  d.block(cpos, cpos, nc, nc) = c.to_dense();
  return d;
}

Eigen::VectorXd ArrowheadSystem::gather(const Eigen::VectorXd& v, int block) const {
  const auto& idx = block_index[block];
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

Eigen::VectorXd ArrowheadSystem::gather_coupling(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(coupling_dim());
  for (int k = 0; k < coupling_dim(); ++k) out[k] = v[coupling_index[k]];
  return out;
}

Partition Partition::balanced(int num_blocks, int workers) {
  Partition p;
  p.workers = std::max(1, std::min(workers, std::max(1, num_blocks)));
  p.assignment.resize(p.workers);
  const int base = num_blocks / p.workers, extra = num_blocks % p.workers;
  int next = 0;
  for (int w = 0; w < p.workers; ++w) {
    const int count = base + (w < extra ? 1 : 0);
    for (int k = 0; k < count; ++k) p.assignment[w].push_back(next++);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Contributions

namespace {

/// Rows of b that hold at least one entry.
std::vector<int> live_rows(const SparseMatrix& b) {
  std::vector<int> live;
  for (int r = 0; r < b.rows(); ++r) {
    if (!b.row_empty(r)) live.push_back(r);
  }
  return live;
}

}  // namespace

Eigen::MatrixXd local_contribution(const SparseSym& a, const SparseMatrix& b, ScMode mode,
                                   const FactorOptions& options, SymIndefFactor* factor_out) {
  const int nc = b.rows();
  if (mode == ScMode::augmented) {
    AugmentedFactorResult r = partial_factor_augmented(a, b, options);
    if (factor_out) *factor_out = std::move(r.factor);
    return -r.schur_block;
  }
  SymIndefFactor f = SymIndefFactor::factor(a, options);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nc, nc);
  const std::vector<int> live = live_rows(b);
  if (!live.empty()) {
    if (f.singular()) {
      throw SingularFactorization(f.first_zero_pivot(), "local_contribution: singular block");
    }
    const int m = static_cast<int>(live.size());
    RowMajorMatrix x = RowMajorMatrix::Zero(a.dim(), m);
    const auto rs = b.row_start();
    const auto ci = b.col_index();
    const auto va = b.values();
    for (int q = 0; q < m; ++q) {
      for (int p = rs[live[q]]; p < rs[live[q] + 1]; ++p) x(ci[p], q) = va[p];
    }
    const RowMajorMatrix bt = x;
    f.solve_in_place(x);
    const Eigen::MatrixXd compact = bt.transpose() * x;
    for (int p = 0; p < m; ++p) {
      for (int q = 0; q < m; ++q) s(live[p], live[q]) = compact(p, q);
    }
  }
  if (factor_out) *factor_out = std::move(f);
  return s;
}

Inertia inertia_of(const std::vector<Inertia>& blocks, const Inertia& schur) {
  Inertia total = schur;
  for (const auto& b : blocks) total += b;
  return total;
}

// ---------------------------------------------------------------------------
// Factorization

SchurFactorization SchurFactorization::factor(const ArrowheadSystem& sys,
                                              const SchurOptions& options, PhaseTimes* times) {
  SchurFactorization out;
  out.system_ = &sys;
  out.options_ = options;
  const int nb = sys.num_blocks();
  const int nc = sys.coupling_dim();
  const Partition part = Partition::balanced(nb, options.workers);

  auto t0 = Clock::now();
  std::vector<Eigen::MatrixXd> contrib(nb);
  std::vector<std::optional<SymIndefFactor>> factors(nb);
  std::vector<char> failed(nb, 0);
  run_partitioned(part, [&](int k) {
    SymIndefFactor f;
    try {
      contrib[k] = local_contribution(sys.a[k], sys.b[k], options.mode, options.factor, &f);
    } catch (const SingularFactorization&) {
      f = SymIndefFactor::factor(sys.a[k], options.factor);
      failed[k] = 1;
    }
    if (f.singular()) failed[k] = 1;
    factors[k] = std::move(f);
  });

  std::vector<Inertia> block_inertia(nb);
  for (int k = 0; k < nb; ++k) block_inertia[k] = factors[k]->inertia();
  for (int k = 0; k < nb; ++k) {
    if (failed[k]) {
      out.singular_block_ = k;
      out.inertia_ = inertia_of(block_inertia, Inertia{0, 0, nc});
      if (times) times->sc_assembly += seconds_since(t0);
      return out;
    }
  }

  // Fixed ascending-block reduction keeps S independent of the partition.
  out.s_ = sys.c.to_dense();
  for (int k = 0; k < nb; ++k) out.s_ -= contrib[k];
  if (times) times->sc_assembly += seconds_since(t0);

  t0 = Clock::now();
  out.s_factor_ = SymIndefFactor::factor_dense(out.s_, options.factor);
  out.inertia_ = inertia_of(block_inertia, out.s_factor_.inertia());
  if (out.s_factor_.singular()) out.singular_block_ = -1;
  if (!options.memory_saving) out.blocks_ = std::move(factors);
  if (times) times->sc_solve += seconds_since(t0);
  return out;
}

Eigen::VectorXd SchurFactorization::solve(const Eigen::VectorXd& rhs, PhaseTimes* times) const {
  if (singular()) {
    throw SingularFactorization(singular_block_, "Schur solve on a singular factorization");
  }
  const ArrowheadSystem& sys = *system_;
  const int nb = sys.num_blocks();
  const Partition part = Partition::balanced(nb, options_.workers);

  auto factor_of = [&](int k, std::optional<SymIndefFactor>& scratch) -> const SymIndefFactor& {
    if (!options_.memory_saving) return *blocks_[k];
    scratch = SymIndefFactor::factor(sys.a[k], options_.factor);
    return *scratch;
  };

  auto t0 = Clock::now();
  std::vector<Eigen::VectorXd> r(nb);
  run_partitioned(part, [&](int k) {
    std::optional<SymIndefFactor> scratch;
    const Eigen::VectorXd bk = sys.gather(rhs, k);
    r[k] = sys.b[k].multiply(bk.size() ? factor_of(k, scratch).solve(bk) : bk);
  });
  Eigen::VectorXd g = sys.gather_coupling(rhs);
  for (int k = 0; k < nb; ++k) g -= r[k];
  if (times) times->sc_rhs += seconds_since(t0);

  t0 = Clock::now();
  const Eigen::VectorXd ug = g.size() ? s_factor_.solve(g) : g;
  if (times) times->sc_solve += seconds_since(t0);

  t0 = Clock::now();
  Eigen::VectorXd out(sys.dim);
  for (int q = 0; q < sys.coupling_dim(); ++q) out[sys.coupling_index[q]] = ug[q];
  run_partitioned(part, [&](int k) {
    std::optional<SymIndefFactor> scratch;
    const Eigen::VectorXd bk = sys.gather(rhs, k) - sys.b[k].multiply_transpose(ug);
    if (!bk.size()) return;
    const Eigen::VectorXd uk = factor_of(k, scratch).solve(bk);
    const auto& idx = sys.block_index[k];
    for (std::size_t p = 0; p < idx.size(); ++p) out[idx[p]] = uk[static_cast<Eigen::Index>(p)];
  });
  if (times) times->local_solve += seconds_since(t0);
  return out;
}

std::uint64_t SchurFactorization::schur_checksum() const { return checksum(s_); }

namespace {

std::uint64_t fnv1a(const double* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, data + i, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

std::uint64_t checksum(const Eigen::MatrixXd& m) {
  return fnv1a(m.data(), static_cast<std::size_t>(m.size()));
}

std::uint64_t checksum(const Eigen::VectorXd& v) {
  return fnv1a(v.data(), static_cast<std::size_t>(v.size()));
}

}  // namespace arrowip
