#include "arrowip/mpopf_schur.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

namespace arrowip {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

ReplicatedScBlock replicated_contribution(const SymIndefFactor& a_factor, const Eigen::MatrixXd& c0,
                                          const Eigen::MatrixXd& c1) {
  const Eigen::Index ns = c1.rows();
  Eigen::MatrixXd borders(c1.cols(), 2 * ns);
  borders << c1.transpose(), c0.transpose();
  const Eigen::MatrixXd x = a_factor.solve(borders);
  ReplicatedScBlock out;
  out.s11 = symmetrized(-c1 * x.leftCols(ns));
  out.s10 = -c0 * x.leftCols(ns);
  out.s00 = symmetrized(-c0 * x.rightCols(ns));
  return out;
}

ReplicatedScBlock replicated_contribution(const SparseSym& a, const Eigen::MatrixXd& c0,
                                          const Eigen::MatrixXd& c1, const FactorOptions& options) {
  return replicated_contribution(SymIndefFactor::factor(a, options), c0, c1);
}

Eigen::MatrixXd expand_contribution(const ReplicatedScBlock& b, int n, int num_periods) {
  const Eigen::Index ns = b.s11.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(num_periods * ns, num_periods * ns);
  for (int i = n; i < num_periods; ++i) {
    for (int j = n; j < num_periods; ++j) {
      Eigen::MatrixXd blk;
      if (i == n && j == n) {
        blk = b.s11;
      } else if (j == n) {
        blk = b.s10;
      } else if (i == n) {
        blk = b.s10.transpose();
      } else {
        blk = b.s00;
      }
      s.block(i * ns, j * ns, ns, ns) = blk;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

std::size_t CompressedSc::stored_values() const {
  std::size_t n = 0;
  for (const auto& m : diag) n += static_cast<std::size_t>(m.size());
  for (const auto& m : off) n += static_cast<std::size_t>(m.size());
  return n;
}

Eigen::MatrixXd CompressedSc::expand() const {
  const int ns = block_size;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(num_periods * ns, num_periods * ns);
  for (int k = 0; k < num_periods; ++k) s.block(k * ns, k * ns, ns, ns) = diag[k];
  for (int j = 0; j + 1 < num_periods; ++j) {
    for (int i = j + 1; i < num_periods; ++i) {
      s.block(i * ns, j * ns, ns, ns) = off[j];
      s.block(j * ns, i * ns, ns, ns) = off[j].transpose();
    }
  }
  return s;
}

CompressedSc accumulate_global(const std::vector<ReplicatedScBlock>& contributions,
                               const std::vector<Eigen::MatrixXd>& corner_diag) {
  CompressedSc sc;
  sc.num_periods = static_cast<int>(contributions.size());
  if (sc.num_periods == 0) return sc;
  sc.block_size = static_cast<int>(contributions[0].s11.rows());
  const int ns = sc.block_size;
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(ns, ns);  // sum of s00 over earlier periods
  for (int k = 0; k < sc.num_periods; ++k) {
    sc.diag.push_back(corner_diag[k] + contributions[k].s11 + prefix);
    if (k + 1 < sc.num_periods) sc.off.push_back(contributions[k].s10 + prefix);
    prefix += contributions[k].s00;
  }
  return sc;
}

// ---------------------------------------------------------------------------

StructuredFactor StructuredFactor::factorize(CompressedSc sc, const FactorOptions& options) {
  StructuredFactor f;
  f.n_ = sc.num_periods;
  f.ns_ = sc.block_size;
  for (int k = 0; k < f.n_; ++k) {
    SymIndefFactor p = SymIndefFactor::factor_dense(sc.diag[k], options);
    ++f.factor_ops_;
    f.inertia_ += p.inertia();
    if (p.singular()) {
      f.singular_pivot_ = k;
      f.inertia_.zero += (f.n_ - k - 1) * f.ns_;
      f.pivots_.push_back(std::move(p));
      return f;
    }
    if (k + 1 < f.n_) {
      const Eigen::MatrixXd x = p.solve(Eigen::MatrixXd(sc.off[k].transpose()));
      const Eigen::MatrixXd update = symmetrized(sc.off[k] * x);
      f.multipliers_.push_back(x.transpose());
      f.factor_ops_ += 2;
      for (int i = k + 1; i < f.n_; ++i) {
        sc.diag[i] -= update;
        ++f.factor_ops_;
      }
      for (int j = k + 1; j + 1 < f.n_; ++j) {
        sc.off[j] -= update;
        ++f.factor_ops_;
      }
    }
    f.pivots_.push_back(std::move(p));
  }
  return f;
}

Eigen::VectorXd StructuredFactor::solve(const Eigen::VectorXd& rhs) const {
  if (singular()) {
    throw SingularFactorization(singular_pivot_, "structured Schur solve: singular pivot block " +
                                                     std::to_string(singular_pivot_));
  }
  const int ns = ns_;
  std::int64_t ops = 0;
  Eigen::VectorXd y(rhs.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ns);
  for (int i = 0; i < n_; ++i) {
    y.segment(i * ns, ns) = rhs.segment(i * ns, ns) - acc;
    ++ops;
    if (i + 1 < n_) {
      acc += multipliers_[i] * y.segment(i * ns, ns);
      ops += 2;
    }
  }
  for (int i = 0; i < n_; ++i) {
    y.segment(i * ns, ns) = pivots_[i].solve(Eigen::VectorXd(y.segment(i * ns, ns)));
    ++ops;
  }
  Eigen::VectorXd x(rhs.size());
  Eigen::VectorXd suffix = Eigen::VectorXd::Zero(ns);
  for (int k = n_ - 1; k >= 0; --k) {
    x.segment(k * ns, ns) = y.segment(k * ns, ns);
    if (k + 1 < n_) {
      x.segment(k * ns, ns) -= multipliers_[k].transpose() * suffix;
      ops += 2;
    }
    suffix += x.segment(k * ns, ns);
    ++ops;
  }
  solve_ops_ = ops;
  return x;
}

// ---------------------------------------------------------------------------

StructuredSchurFactorization StructuredSchurFactorization::factor(const ArrowheadSystem& sys,
                                                                  const SchurOptions& options,
                                                                  PhaseTimes* times) {
  StructuredSchurFactorization out;
  out.system_ = &sys;
  out.options_ = options;
  const int n = sys.num_blocks();
  const int nc = sys.coupling_dim();
  if (n == 0 || nc % n != 0) {
    throw StructureViolation(-1, -1, "structured Schur path: coupling rows do not split evenly "
                                     "across periods");
  }
  const int ns = nc / n;
  out.ns_ = ns;

  auto t0 = Clock::now();
  const Eigen::MatrixXd corner = sys.c.to_dense();
  std::vector<Eigen::MatrixXd> corner_diag(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::MatrixXd blk = corner.block(i * ns, j * ns, ns, ns);
      if (i == j) {
        corner_diag[i] = blk;
      } else if (ns && blk.cwiseAbs().maxCoeff() != 0.0) {
        throw StructureViolation(sys.coupling_index[i * ns], sys.coupling_index[j * ns],
                                 "structured Schur path: corner couples periods " +
                                     std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }

  out.c0_.resize(n);
  out.c1_.resize(n);
  std::vector<std::optional<SymIndefFactor>> factors(n);
  std::vector<ReplicatedScBlock> contrib(n);
  std::vector<char> failed(n, 0);
  const Partition part = Partition::balanced(n, options.workers);
  run_partitioned(part, [&](int p) {
    const Eigen::MatrixXd b = sys.b[p].to_dense();
    const Eigen::Index cols = b.cols();
    for (int k = 0; k < p; ++k) {
      if (ns && b.middleRows(k * ns, ns).cwiseAbs().maxCoeff() != 0.0) {
        throw StructureViolation(sys.coupling_index[k * ns], -1,
                                 "structured Schur path: period " + std::to_string(p) +
                                     " touches coupling rows of an earlier period");
      }
    }
    out.c1_[p] = b.middleRows(p * ns, ns);
    out.c0_[p] = p + 1 < n ? Eigen::MatrixXd(b.middleRows((p + 1) * ns, ns))
                           : Eigen::MatrixXd::Zero(ns, cols);
    for (int k = p + 2; k < n; ++k) {
      if (b.middleRows(k * ns, ns) != out.c0_[p]) {
        throw StructureViolation(sys.coupling_index[k * ns], -1,
                                 "structured Schur path: border of period " + std::to_string(p) +
                                     " is not replicated");
      }
    }
    SymIndefFactor f = SymIndefFactor::factor(sys.a[p], options.factor);
    if (f.singular()) {
      failed[p] = 1;
    } else {
      contrib[p] = replicated_contribution(f, out.c0_[p], out.c1_[p]);
    }
    factors[p] = std::move(f);
  });

  Inertia blocks;
  for (int p = 0; p < n; ++p) blocks += factors[p]->inertia();
  for (int p = 0; p < n; ++p) {
    if (failed[p]) {
      out.singular_block_ = p;
      out.inertia_ = blocks + Inertia{0, 0, nc};
      if (times) times->sc_assembly += seconds_since(t0);
      return out;
    }
  }
  out.compressed_ = accumulate_global(contrib, corner_diag);
  if (times) times->sc_assembly += seconds_since(t0);

  t0 = Clock::now();
  out.factor_ = StructuredFactor::factorize(out.compressed_, options.factor);
  out.inertia_ = blocks + out.factor_->inertia();
  if (out.factor_->singular()) out.singular_block_ = -1;
  if (!options.memory_saving) out.blocks_ = std::move(factors);
  if (times) times->sc_solve += seconds_since(t0);
  return out;
}

Eigen::VectorXd StructuredSchurFactorization::solve(const Eigen::VectorXd& rhs,
                                                    PhaseTimes* times) const {
  if (singular()) {
    throw SingularFactorization(singular_block_, "structured Schur solve on a singular factor");
  }
  const ArrowheadSystem& sys = *system_;
  const int n = sys.num_blocks();
  const int ns = ns_;
  const Partition part = Partition::balanced(n, options_.workers);
  auto factor_of = [&](int k, std::optional<SymIndefFactor>& scratch) -> const SymIndefFactor& {
    if (!options_.memory_saving) return *blocks_[k];
    scratch = SymIndefFactor::factor(sys.a[k], options_.factor);
    return *scratch;
  };

  auto t0 = Clock::now();
  std::vector<Eigen::VectorXd> own(n), later(n);
  run_partitioned(part, [&](int k) {
    std::optional<SymIndefFactor> scratch;
    const Eigen::VectorXd w = factor_of(k, scratch).solve(sys.gather(rhs, k));
    own[k] = c1_[k] * w;
    later[k] = c0_[k] * w;
  });
  Eigen::VectorXd g = sys.gather_coupling(rhs);
  Eigen::VectorXd prefix = Eigen::VectorXd::Zero(ns);
  for (int k = 0; k < n; ++k) {
    g.segment(k * ns, ns) -= own[k] + prefix;
    prefix += later[k];
  }
  if (times) times->sc_rhs += seconds_since(t0);

  t0 = Clock::now();
  const Eigen::VectorXd ug = factor_->solve(g);
  if (times) times->sc_solve += seconds_since(t0);

  t0 = Clock::now();
  std::vector<Eigen::VectorXd> tail(n);
  Eigen::VectorXd suffix = Eigen::VectorXd::Zero(ns);
  for (int k = n - 1; k >= 0; --k) {
    tail[k] = suffix;
    suffix += ug.segment(k * ns, ns);
  }
  Eigen::VectorXd out(sys.dim);
  for (int q = 0; q < sys.coupling_dim(); ++q) out[sys.coupling_index[q]] = ug[q];
  run_partitioned(part, [&](int k) {
    std::optional<SymIndefFactor> scratch;
    const Eigen::VectorXd bk = sys.gather(rhs, k) -
                               c1_[k].transpose() * ug.segment(k * ns, ns) -
                               c0_[k].transpose() * tail[k];
    const Eigen::VectorXd uk = factor_of(k, scratch).solve(bk);
    const auto& idx = sys.block_index[k];
    for (std::size_t p = 0; p < idx.size(); ++p) out[idx[p]] = uk[static_cast<Eigen::Index>(p)];
  });
  if (times) times->local_solve += seconds_since(t0);
  return out;
}

std::uint64_t StructuredSchurFactorization::schur_checksum() const {
  return checksum(compressed_.expand());
}

}  // namespace arrowip
