#include <doctest.h>

#include <random>

#include "arrowip/schur.hpp"
#include "support.hpp"

using namespace arrowip;

namespace {

SchurOptions with_workers(int w, ScMode mode = ScMode::backsolve) {
  SchurOptions o;
  o.workers = w;
  o.mode = mode;
  return o;
}

}  // namespace

TEST_CASE("permutation to arrowhead form") {
  SUBCASE("single block") {
    const SparseSym m = SparseSym::from_dense(Eigen::MatrixXd::Identity(3, 3));
    const ArrowheadSystem s = permute_to_arrowhead(m, {0, 0, 0}, 1);
    CHECK(s.num_blocks() == 1);
    CHECK(s.coupling_dim() == 0);
    CHECK(s.a[0].to_dense() == Eigen::MatrixXd::Identity(3, 3));
  }
  SUBCASE("round trip") {
    std::mt19937 rng(1);
    const auto f = testing::random_arrowhead(rng, 3, 5, 2);
    const ArrowheadSystem s = permute_to_arrowhead(f.matrix, f.labels, f.num_blocks);
    std::vector<int> order;
    for (const auto& b : s.block_index) order.insert(order.end(), b.begin(), b.end());
    order.insert(order.end(), s.coupling_index.begin(), s.coupling_index.end());
    const Eigen::MatrixXd full = f.matrix.to_dense();
    const Eigen::MatrixXd perm = s.to_dense();
    for (int i = 0; i < s.dim; ++i)
      for (int j = 0; j < s.dim; ++j) CHECK(perm(i, j) == full(order[i], order[j]));
  }
  SUBCASE("cross-block entry") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
    m(0, 1) = m(1, 0) = 0.5;
    CHECK_THROWS_AS(permute_to_arrowhead(SparseSym::from_dense(m), {0, 1, kCoupling}, 2),
                    StructureViolation);
  }
}

TEST_CASE("scalar arrowhead by hand") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 3;
  const ArrowheadSystem s = permute_to_arrowhead(SparseSym::from_dense(m), {0, kCoupling}, 1);
  for (ScMode mode : {ScMode::backsolve, ScMode::augmented}) {
    const auto f = SchurFactorization::factor(s, with_workers(1, mode));
    CHECK(f.schur_matrix()(0, 0) == doctest::Approx(2.5));
    const Eigen::VectorXd x = f.solve(Eigen::Vector2d(2, 3));
    CHECK(x[1] == doctest::Approx(0.8));
    CHECK(x[0] == doctest::Approx(0.6));
    CHECK(f.inertia() == Inertia{2, 0, 0});
  }
}

TEST_CASE("decoupled blocks") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m.diagonal() << 2, 4, 5;
  const ArrowheadSystem s = permute_to_arrowhead(SparseSym::from_dense(m), {0, 1, kCoupling}, 2);
  const auto f = SchurFactorization::factor(s, {});
  CHECK(f.schur_matrix()(0, 0) == 5.0);
  const Eigen::VectorXd x = f.solve(Eigen::Vector3d(2, 4, 10));
  CHECK(x == Eigen::Vector3d(1, 1, 2));
  CHECK(inertia_of({Inertia{1, 0, 0}, Inertia{1, 0, 0}}, Inertia{1, 0, 0}) == Inertia{3, 0, 0});
}

TEST_CASE("random arrowhead solves match the dense solve") {
  std::mt19937 rng(7);
  const auto f = testing::random_arrowhead(rng, 4, 12, 5);
  const ArrowheadSystem s = permute_to_arrowhead(f.matrix, f.labels, f.num_blocks);
  const Eigen::MatrixXd dense = f.matrix.to_dense();
  for (ScMode mode : {ScMode::backsolve, ScMode::augmented}) {
    for (bool mem : {false, true}) {
      SchurOptions o = with_workers(2, mode);
      o.memory_saving = mem;
      const auto fac = SchurFactorization::factor(s, o);
      const Eigen::VectorXd x = fac.solve(f.rhs);
      CHECK(testing::relative_residual(dense, x, f.rhs) <= 1e-12);
      CHECK(fac.inertia() == testing::eigen_inertia(dense));
    }
  }
}

TEST_CASE("local contributions") {
  const SparseSym eye = SparseSym::from_dense(Eigen::MatrixXd::Identity(3, 3));
  const Triplet tb[] = {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}};
  const SparseMatrix b = SparseMatrix::from_triplets(3, 3, tb);
  for (ScMode mode : {ScMode::backsolve, ScMode::augmented}) {
    CHECK(local_contribution(eye, SparseMatrix(2, 3), mode).isZero(0.0));
    CHECK(local_contribution(eye, b, mode).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  }
  std::mt19937 rng(9);
  const auto f = testing::random_arrowhead(rng, 1, 10, 3);
  const ArrowheadSystem s = permute_to_arrowhead(f.matrix, f.labels, 1);
  const Eigen::MatrixXd p = local_contribution(s.a[0], s.b[0], ScMode::backsolve);
  const Eigen::MatrixXd q = local_contribution(s.a[0], s.b[0], ScMode::augmented);
  CHECK((p - q).lpNorm<Eigen::Infinity>() <= 1e-10 * std::max(1.0, p.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("worker count does not change any bit") {
  std::mt19937 rng(13);
  const auto f = testing::random_arrowhead(rng, 9, 6, 4);
  const ArrowheadSystem s = permute_to_arrowhead(f.matrix, f.labels, f.num_blocks);
  const auto ref = SchurFactorization::factor(s, with_workers(1));
  const Eigen::VectorXd x1 = ref.solve(f.rhs);
  for (int w : {2, 4, 8}) {
    const auto fac = SchurFactorization::factor(s, with_workers(w));
    CHECK(fac.schur_checksum() == ref.schur_checksum());
    CHECK(checksum(fac.solve(f.rhs)) == checksum(x1));
  }
}

TEST_CASE("Schur dimension equals the coupling size") {
  std::mt19937 rng(17);
  for (int blocks : {2, 8, 64}) {
    const auto f = testing::random_arrowhead(rng, blocks, 3, 4);
    const ArrowheadSystem s = permute_to_arrowhead(f.matrix, f.labels, f.num_blocks);
    const auto fac = SchurFactorization::factor(s, with_workers(4));
    CHECK(fac.schur_matrix().rows() == 4);
  }
}

TEST_CASE("balanced partition") {
  const Partition p = Partition::balanced(10, 4);
  std::vector<int> seen;
  std::size_t lo = 100, hi = 0;
  for (const auto& a : p.assignment) {
    seen.insert(seen.end(), a.begin(), a.end());
    lo = std::min(lo, a.size());
    hi = std::max(hi, a.size());
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(hi - lo <= 1);
}

TEST_CASE("singular block is reported") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(1, 1) = 1;
  m(2, 2) = 1;
  const ArrowheadSystem s = permute_to_arrowhead(SparseSym::from_dense(m), {0, 1, kCoupling}, 2);
  const auto f = SchurFactorization::factor(s, {});
  CHECK(f.singular());
  CHECK(f.singular_block() == 0);
  CHECK(f.inertia().zero >= 1);
}
