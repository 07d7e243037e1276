#pragma once

#include <Eigen/Dense>
#include <vector>

namespace spinterface {

/// Magnetic parameters of a single spin-S system. Energies are stored as
/// frequencies in GHz throughout; h and mu_B never appear separately.
struct SpinSystem {
  double spin = 1.0;          // S; half-integer or integer, dimension 2S+1
  double zfs_d_ghz = 0.0;     // axial zero-field splitting D
  double zfs_e_ghz = 0.0;     // transverse zero-field splitting E
  double g_factor = 2.0;
  Eigen::Vector3d zfs_axis = Eigen::Vector3d::UnitZ();  // molecular z in lab frame

  int dimension() const { return static_cast<int>(2.0 * spin + 1.5); }

  // Throws std::invalid_argument on violated invariants:
  // 2S must be a positive integer, D >= 0, 0 <= E <= D/3, zfs_axis unit norm.
  void validate() const;
};

struct FieldPoint {
  Eigen::Vector3d b0_tesla = Eigen::Vector3d::Zero();   // static field
  Eigen::Vector3d b1_dir = Eigen::Vector3d::UnitX();    // microwave field direction

  void validate() const;
};

struct SpinOperators {
  Eigen::MatrixXcd sx, sy, sz;
};

struct EigenSystem {
  Eigen::VectorXd energies_ghz;  // ascending
  Eigen::MatrixXcd states;       // column eigenvectors, unitary
};

/// One microwave transition between eigenlevels (lower < upper in energy order).
struct Transition {
  int lower = 0;
  int upper = 0;
  double frequency_ghz = 0.0;
  double intensity = 0.0;          // |<i| S . b1_dir |j>|^2, lab-frame operators
  double population_weight = 0.0;  // Boltzmann p(lower) - p(upper)
};

// Ladder construction of Sx, Sy, Sz in the basis |m = S, S-1, ..., -S>.
// Throws std::domain_error for invalid spin.
SpinOperators spin_operators(double spin);

// Right-handed orthonormal triad (e1, e2, e3) with e3 = axis, obtained by the
// minimal rotation taking the lab z axis onto `axis`.
Eigen::Matrix3d frame_from_axis(const Eigen::Vector3d& axis);

// H/h = D(Sz'^2 - S(S+1)/3) + E(Sx'^2 - Sy'^2) + g mu_B/h B0 . S, in GHz,
// primes denoting the molecular frame set by zfs_axis.
Eigen::MatrixXcd build_hamiltonian(const SpinSystem& sys, const FieldPoint& field);

// Ascending eigenvalues; degenerate groups ordered by descending overlap with
// the |m = S> basis state, eigenvector phases fixed deterministically.
// Throws std::domain_error if H is not Hermitian within 1e-10.
EigenSystem eigensystem(const Eigen::MatrixXcd& h);

// All n(n-1)/2 level pairs with lab-frame drive matrix elements and Boltzmann
// population differences at the given temperature.
std::vector<Transition> transition_table(const SpinSystem& sys, const FieldPoint& field,
                                         double temperature_k);

std::vector<Transition> transition_table(const EigenSystem& es, const FieldPoint& field,
                                         double spin, double temperature_k);

}  // namespace spinterface
