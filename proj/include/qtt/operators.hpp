#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "qtt/grid.hpp"
#include "qtt/mpo.hpp"

namespace qtt {

// Default rounding applied after MPO algebra; keeps operator bonds small
// without touching physical accuracy.
inline TruncationPolicy mpo_rounding() { return TruncationPolicy{1 << 20, 1e-12}; }

// diag(x_1 .. x_N) as a bond-2 MPO. Site tensors follow the closed form for a
// binary-indexed affine ramp: channel 0 carries the constant, channel 1
// accumulates set bits with weight doubling at each coarser level.
inline Mpo position_mpo(const QuadratureGrid& grid) {
  grid.validate();
  const int n = grid.n_bits;
  const double dx = grid.dx();
  Mpo op;
  op.sites.resize(n);
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return Eigen::MatrixXcd::Zero(r, c); };
  if (n == 1) {
    MpoSite s;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(1, 1);
    s.w[0][0](0, 0) = grid.x_min;
    s.w[1][1](0, 0) = grid.x_min + dx;
    op.sites[0] = s;
    return op;
  }
  {
    MpoSite s;  // (1 x 2): [ I, diag(0,1) ]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(1, 2);
    s.w[0][0](0, 0) = 1.0;
    s.w[1][1](0, 0) = 1.0;
    s.w[1][1](0, 1) = 1.0;
    op.sites[0] = s;
  }
  for (int k = 1; k < n - 1; ++k) {
    MpoSite s;  // (2 x 2): [[ I, diag(0,1) ], [ 0, 2I ]]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(2, 2);
    s.w[0][0](0, 0) = 1.0;
    s.w[1][1](0, 0) = 1.0;
    s.w[1][1](0, 1) = 1.0;
    s.w[0][0](1, 1) = 2.0;
    s.w[1][1](1, 1) = 2.0;
    op.sites[k] = s;
  }
  {
    MpoSite s;  // (2 x 1): [ diag(x_a, x_a + dx) ; 2*dx*I ]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(2, 1);
    s.w[0][0](0, 0) = grid.x_min;
    s.w[1][1](0, 0) = grid.x_min + dx;
    s.w[0][0](1, 0) = 2.0 * dx;
    s.w[1][1](1, 0) = 2.0 * dx;
    op.sites[n - 1] = s;
  }
  return op;
}

// Second-order central difference with implicit zero boundary values, as a
// bond-3 MPO: channels {identity, raise-to-next, lower-to-previous}.
inline Mpo derivative_mpo(const QuadratureGrid& grid) {
  grid.validate();
  const int n = grid.n_bits;
  const double f = 1.0 / (2.0 * grid.dx());
  Mpo op;
  op.sites.resize(n);
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return Eigen::MatrixXcd::Zero(r, c); };
  // physical blocks: I, U = |0><1|, L = |1><0|
  if (n == 1) {
    MpoSite s;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(1, 1);
    s.w[0][1](0, 0) = f;   // +1/(2dx) above the diagonal
    s.w[1][0](0, 0) = -f;  // -1/(2dx) below
    op.sites[0] = s;
    return op;
  }
  {
    MpoSite s;  // (1 x 3): (1/2dx) [ I, U, -L ]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(1, 3);
    s.w[0][0](0, 0) = f;
    s.w[1][1](0, 0) = f;
    s.w[0][1](0, 1) = f;
    s.w[1][0](0, 2) = -f;
    op.sites[0] = s;
  }
  for (int k = 1; k < n - 1; ++k) {
    MpoSite s;  // (3 x 3): [[ I, U, -L ], [ 0, L, 0 ], [ 0, 0, U ]]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(3, 3);
    s.w[0][0](0, 0) = 1.0;
    s.w[1][1](0, 0) = 1.0;
    s.w[0][1](0, 1) = 1.0;
    s.w[1][0](0, 2) = -1.0;
    s.w[1][0](1, 1) = 1.0;
    s.w[0][1](2, 2) = 1.0;
    op.sites[k] = s;
  }
  {
    MpoSite s;  // (3 x 1): [ U - L ; L ; U ]
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) s.w[i][j] = zeros(3, 1);
    s.w[0][1](0, 0) = 1.0;
    s.w[1][0](0, 0) = -1.0;
    s.w[1][0](1, 0) = 1.0;
    s.w[0][1](2, 0) = 1.0;
    op.sites[n - 1] = s;
  }
  return op;
}

// Ladder operators for one mode: a = (X + D)/sqrt2, a^dag = (X - D)/sqrt2,
// number = a^dag a, all rounded at the default MPO tolerance.
struct ModeOperators {
  Mpo X;
  Mpo D;
  Mpo a;
  Mpo a_dag;
  Mpo number;
};

inline ModeOperators ladder_mpos(const QuadratureGrid& grid) {
  ModeOperators ops;
  ops.X = position_mpo(grid);
  ops.D = derivative_mpo(grid);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ops.a = mpo_truncate(mpo_add(ops.X, ops.D, inv_sqrt2, inv_sqrt2), mpo_rounding());
  ops.a_dag = mpo_truncate(mpo_add(ops.X, ops.D, inv_sqrt2, -inv_sqrt2), mpo_rounding());
  ops.number = mpo_truncate(mpo_mul(ops.a_dag, ops.a), mpo_rounding());
  return ops;
}

// Pads a single-mode operator with identities on the other mode's sites.
inline Mpo embed_mpo(const Mpo& op, const ModeLayout& layout, Mode mode) {
  const int own = (mode == Mode::pump) ? layout.pump.n_bits : layout.signal.n_bits;
  if (op.n_sites() != own)
    throw std::invalid_argument("embed_mpo: operator does not match the mode's bit count");
  Mpo out;
  const MpoSite id = mpo_site_scalar(Eigen::Matrix2cd::Identity());
  if (mode == Mode::pump) {
    out.sites = op.sites;
    out.sites.insert(out.sites.end(), layout.signal.n_bits, id);
  } else {
    out.sites.assign(layout.pump.n_bits, id);
    out.sites.insert(out.sites.end(), op.sites.begin(), op.sites.end());
  }
  return out;
}

// Dimensionless SPDC generator in the convention where the implicit-Euler
// propagator I - i*dtau*H squeezes the signal X quadrature for real positive
// pump amplitude: H = i (a_p as^dag as^dag - a_p^dag as as) = i (T - T^dag)
// with T = a_p as^dag as^dag.
inline Mpo hamiltonian_mpo(const ModeLayout& layout, const TruncationPolicy& rounding = mpo_rounding()) {
  ModeOperators pump = ladder_mpos(layout.pump);
  ModeOperators signal = ladder_mpos(layout.signal);
  Mpo ap = embed_mpo(pump.a, layout, Mode::pump);
  Mpo asd = embed_mpo(signal.a_dag, layout, Mode::signal);
  Mpo t = mpo_truncate(mpo_mul(mpo_truncate(mpo_mul(ap, asd), rounding), asd), rounding);
  Mpo h = mpo_add(t, mpo_adjoint(t), cxd(0.0, 1.0), cxd(0.0, -1.0));
  return mpo_truncate(h, rounding);
}

// U = I - i*dtau*H, rounded.
inline Mpo propagator_mpo(const Mpo& hamiltonian, double delta_tau,
                          const TruncationPolicy& rounding = mpo_rounding()) {
  if (delta_tau < 0.0) throw std::invalid_argument("propagator_mpo: delta_tau must be >= 0");
  Mpo u = mpo_add(mpo_identity(hamiltonian.n_sites()), hamiltonian, 1.0, cxd(0.0, -delta_tau));
  return mpo_truncate(u, rounding);
}

// Everything the evolution loop and observables need, built once per run.
struct SystemOperators {
  ModeLayout layout;
  double delta_tau = 0.0;
  Mpo hamiltonian;     // dimensionless H
  Mpo propagator;      // I - i*dtau*H
  Mpo number_pump;     // embedded on the full chain
  Mpo number_signal;
  Mpo x_signal;
  Mpo x_signal_sq;
};

inline SystemOperators build_system_operators(const ModeLayout& layout, double delta_tau) {
  SystemOperators sys;
  sys.layout = layout;
  sys.delta_tau = delta_tau;
  ModeOperators pump = ladder_mpos(layout.pump);
  ModeOperators signal = ladder_mpos(layout.signal);
  sys.hamiltonian = hamiltonian_mpo(layout);
  sys.propagator = propagator_mpo(sys.hamiltonian, delta_tau);
  sys.number_pump = embed_mpo(pump.number, layout, Mode::pump);
  sys.number_signal = embed_mpo(signal.number, layout, Mode::signal);
  sys.x_signal = embed_mpo(signal.X, layout, Mode::signal);
  sys.x_signal_sq =
      mpo_truncate(mpo_mul(sys.x_signal, sys.x_signal), mpo_rounding());
  return sys;
}

}  // namespace qtt
