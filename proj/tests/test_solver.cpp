#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qtt/operators.hpp"
#include "qtt/solver.hpp"

using namespace qtt;
using qtt_test::random_mps;

namespace {

SolverConfig loose_solver(int chi = 1 << 20, double sv = 0.0) {
  SolverConfig cfg;
  cfg.truncation = TruncationPolicy{chi, sv};
  return cfg;
}

// Dense matrix of the frames left of `site` (columns orthonormal when the
// sites are left-orthogonal).
Eigen::MatrixXcd left_frame_dense(const Mps& psi, int site) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = 0; j < site; ++j) {
    Eigen::MatrixXcd next(2 * m.rows(), psi.sites[j].right());
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXcd part = m * psi.sites[j].a[i];
      for (Eigen::Index r = 0; r < m.rows(); ++r) next.row(2 * r + i) = part.row(r);
    }
    m.swap(next);
  }
  return m;
}

Eigen::MatrixXcd right_frame_dense(const Mps& psi, int site) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = psi.n_sites() - 1; j > site; --j) {
    Eigen::MatrixXcd next(psi.sites[j].left(), 2 * m.cols());
    next.leftCols(m.cols()) = psi.sites[j].a[0] * m;
    next.rightCols(m.cols()) = psi.sites[j].a[1] * m;
    m.swap(next);
  }
  return m;  // (bond x 2^(n-site-1))
}

ModeLayout small_layout() { return {{-8.0, 8.0, 3}, {-6.0, 6.0, 3}}; }

}  // namespace

TEST_CASE("split_two_site splits and truncates") {
  auto gen = qtt_test::rng(301);
  // rank-1 theta
  Eigen::MatrixXcd u = qtt_test::random_matrix(6, 1, gen);
  Eigen::MatrixXcd v = qtt_test::random_matrix(1, 8, gen);
  TwoSiteSplit s1 = split_two_site(u * v, TruncationPolicy::lossless());
  CHECK(s1.left.right() == 1);
  CHECK(s1.discarded_weight <= 1e-24);

  // two equal Schmidt values 1/sqrt2 truncated to one
  Eigen::MatrixXcd theta = Eigen::MatrixXcd::Zero(2, 2);
  theta(0, 0) = theta(1, 1) = 1.0 / std::sqrt(2.0);
  TwoSiteSplit s2 = split_two_site(theta, TruncationPolicy::bond_cap(1));
  CHECK(s2.left.right() == 1);
  CHECK(s2.discarded_weight == Catch::Approx(0.5).margin(1e-14));

  // exact reconstruction without truncation
  Eigen::MatrixXcd t = qtt_test::random_matrix(8, 10, gen);
  TwoSiteSplit s3 = split_two_site(t, TruncationPolicy::lossless());
  Eigen::MatrixXcd back(8, 10);
  const Eigen::Index rl = 4, rr = 5;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      back.block(i * rl, j * rr, rl, rr) = s3.left.a[i] * s3.right.a[j];
  CHECK((back - t).norm() <= 1e-13 * t.norm());
}

TEST_CASE("assemble_local_system on a two-site chain is the full system") {
  auto gen = qtt_test::rng(307);
  Mpo op = qtt_test::random_mpo(2, 2, gen);
  Mps rhs = random_mps(2, 2, gen);
  Mps guess = random_mps(2, 2, gen);
  auto [u, b] = assemble_local_system(op, rhs, guess, 0);
  CHECK((u - mpo_to_dense(op)).norm() <= 1e-13 * u.norm());
  CHECK((b - mps_to_dense(rhs)).norm() <= 1e-13 * b.norm());
}

TEST_CASE("assemble_local_system matches the dense galerkin projection") {
  auto gen = qtt_test::rng(311);
  const int n = 6;
  Mpo op = qtt_test::random_mpo(n, 3, gen);
  Mps rhs = random_mps(n, 4, gen);
  Mps psi = canonicalize(random_mps(n, 5, gen), 2);

  auto [u_loc, b_loc] = assemble_local_system(op, rhs, psi, 2);

  // dense frames around the pair (2,3)
  Eigen::MatrixXcd lf = left_frame_dense(psi, 2);   // (2^2 x rl)
  Eigen::MatrixXcd rf = right_frame_dense(psi, 3);  // (rr x 2^2)
  const Eigen::Index rl = lf.cols(), rr = rf.rows();
  const Eigen::Index dim = 4 * rl * rr;
  Eigen::MatrixXcd p(Eigen::Index{1} << n, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    // public ordering: ((l*2 + i)*2 + j)*rr + r
    const Eigen::Index r = col % rr;
    const Eigen::Index j = (col / rr) % 2;
    const Eigen::Index i = (col / (rr * 2)) % 2;
    const Eigen::Index l = col / (rr * 4);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
    // dense index: (left bits)(i)(j)(right bits), left most significant
    for (Eigen::Index lb = 0; lb < lf.rows(); ++lb)
      for (Eigen::Index rb = 0; rb < rf.cols(); ++rb) {
        const Eigen::Index idx = ((lb * 2 + i) * 2 + j) * rf.cols() + rb;
        v(idx) = lf(lb, l) * rf(r, rb);
      }
    p.col(col) = v;
  }
  CHECK((p.adjoint() * p - Eigen::MatrixXcd::Identity(dim, dim)).norm() <= 1e-12);

  Eigen::MatrixXcd u_expect = p.adjoint() * mpo_to_dense(op) * p;
  Eigen::VectorXcd b_expect = p.adjoint() * mps_to_dense(rhs);
  CHECK((u_loc - u_expect).norm() <= 1e-12 * u_expect.norm());
  CHECK((b_loc - b_expect).norm() <= 1e-12 * b_expect.norm());
}

TEST_CASE("identity system returns the right-hand side in one sweep") {
  auto gen = qtt_test::rng(313);
  Mps rhs = random_mps(6, 4, gen);
  auto [x, rep] = solve_linear(mpo_identity(6), rhs, rhs, loose_solver());
  CHECK(rep.sweeps_used == 1);
  CHECK(rep.residual_raw <= 1e-12);
  CHECK(std::abs(inner(x, rhs) - cxd(1, 0)) <= 1e-12);
}

TEST_CASE("solver matches the dense direct solve on the SPDC propagator") {
  ModeLayout layout{{-8.0, 8.0, 5}, {-6.0, 6.0, 5}};
  SystemOperators sys = build_system_operators(layout, 1e-3);
  Eigen::MatrixXcd u_dense = mpo_to_dense(sys.propagator);
  auto gen = qtt_test::rng(317);

  for (int trial = 0; trial < 3; ++trial) {
    Mps rhs = random_mps(10, 6, gen);
    Eigen::VectorXcd expect =
        Eigen::PartialPivLU<Eigen::MatrixXcd>(u_dense).solve(mps_to_dense(rhs));
    SolverConfig cfg = loose_solver();
    cfg.rel_residual_tol = 1e-10;
    auto [x, rep] = solve_linear(sys.propagator, rhs, rhs, cfg);
    CHECK((mps_to_dense(x) - expect).norm() <= 1e-8 * expect.norm());
    CHECK(rep.converged);

    // orthogonal start still converges
    Mps ortho = random_mps(10, 4, gen);
    auto [x2, rep2] = solve_linear(sys.propagator, rhs, ortho, cfg);
    CHECK((mps_to_dense(x2) - expect).norm() <= 1e-7 * expect.norm());
    CHECK(rep2.sweeps_used <= 10);
  }
}

TEST_CASE("gmres local path agrees with the dense local path") {
  ModeLayout layout = small_layout();
  SystemOperators sys = build_system_operators(layout, 1e-3);
  auto gen = qtt_test::rng(331);
  Mps rhs = random_mps(6, 4, gen);

  SolverConfig dense_cfg = loose_solver();
  dense_cfg.dense_solve_max_dim = 1 << 20;
  SolverConfig gmres_cfg = loose_solver();
  gmres_cfg.dense_solve_max_dim = 1;  // force the iterative path everywhere

  auto [xd, rd] = solve_linear(sys.propagator, rhs, rhs, dense_cfg);
  auto [xg, rg] = solve_linear(sys.propagator, rhs, rhs, gmres_cfg);
  CHECK((mps_to_dense(xd) - mps_to_dense(xg)).norm() <= 1e-9);
  CHECK(rd.residual_raw <= 1e-10);
  CHECK(rg.residual_raw <= 1e-10);
}

TEST_CASE("residual decreases monotonically within a sweep") {
  // step through one left-to-right pass by hand with exact local solves and
  // no truncation; the dense residual must not increase at any update
  ModeLayout layout = small_layout();
  SystemOperators sys = build_system_operators(layout, 2e-3);
  Eigen::MatrixXcd ud = mpo_to_dense(sys.propagator);
  auto gen = qtt_test::rng(337);
  Mps rhs = random_mps(6, 4, gen);
  Eigen::VectorXcd bd = mps_to_dense(rhs);
  Mps x = canonicalize(random_mps(6, 4, gen), 0);

  double prev = (ud * mps_to_dense(x) - bd).norm();
  for (int k = 0; k + 1 < 6; ++k) {
    auto [u_loc, b_loc] = assemble_local_system(sys.propagator, rhs, x, k);
    Eigen::VectorXcd sol = Eigen::PartialPivLU<Eigen::MatrixXcd>(u_loc).solve(b_loc);
    const Eigen::Index rl = x.sites[k].left(), rr = x.sites[k + 1].right();
    Eigen::MatrixXcd theta(2 * rl, 2 * rr);
    for (Eigen::Index l = 0; l < rl; ++l)
      for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
          for (Eigen::Index r = 0; r < rr; ++r)
            theta(i * rl + l, j * rr + r) = sol(((l * 2 + i) * 2 + j) * rr + r);
    TwoSiteSplit sp = split_two_site(theta, TruncationPolicy::lossless());
    x.sites[k] = sp.left;
    x.sites[k + 1] = sp.right;
    x.canonical_center = k + 1;
    const double res = (ud * mps_to_dense(x) - bd).norm();
    CHECK(res <= prev + 1e-12);
    prev = res;
  }
}

TEST_CASE("implicit euler contracts the norm") {
  ModeLayout layout = small_layout();
  SystemOperators sys = build_system_operators(layout, 5e-3);
  auto gen = qtt_test::rng(347);
  for (int trial = 0; trial < 4; ++trial) {
    Mps rhs = random_mps(6, 5, gen);
    SolverConfig cfg = loose_solver();
    cfg.rel_residual_tol = 1e-11;
    auto [x, rep] = solve_linear(sys.propagator, rhs, rhs, cfg);
    CHECK(norm(x) <= 1.0 + 1e-10);
  }
}

TEST_CASE("residual_norm applies the grid normalization") {
  auto product = [](int n, int flip_site) {
    std::vector<Eigen::Vector2cd> kets(n, Eigen::Vector2cd(1, 0));
    if (flip_site >= 0) kets[flip_site] = Eigen::Vector2cd(0, 1);
    return qtt_test::product_state(kets);
  };
  // n_total = 30 -> N = 2^5 = 32; n_total = 25 -> N = 1
  for (auto [n, factor] : std::vector<std::pair<int, double>>{{30, std::sqrt(32.0)}, {25, 1.0}}) {
    Mps a = product(n, -1);
    Mps b = product(n, 2);
    auto [raw, normalized] = residual_norm(mpo_identity(n), a, b, 25);
    CHECK(raw == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
    CHECK(normalized == Catch::Approx(std::sqrt(2.0) / factor).margin(1e-12));
    auto [zero_raw, zero_norm] = residual_norm(mpo_identity(n), a, a, 25);
    CHECK(zero_raw <= 1e-12);
  }
}

TEST_CASE("solver reports non-convergence instead of looping") {
  ModeLayout layout = small_layout();
  SystemOperators sys = build_system_operators(layout, 2e-3);
  auto gen = qtt_test::rng(353);
  Mps rhs = random_mps(6, 6, gen);
  SolverConfig cfg;
  cfg.max_sweeps = 1;
  cfg.rel_residual_tol = 1e-14;
  cfg.rel_improvement_tol = 1e-12;
  cfg.truncation = TruncationPolicy{2, 0.0};  // starve the bond dimension
  auto [x, rep] = solve_linear(sys.propagator, rhs, random_mps(6, 2, gen), cfg);
  CHECK_FALSE(rep.converged);
  CHECK(rep.sweeps_used == 1);
  CHECK(rep.max_bond <= 2);
}
