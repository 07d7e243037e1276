#include "spinterface/spin_core.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "spinterface/units.hpp"

namespace spinterface {

using std::complex;
using namespace std::complex_literals;

void SpinSystem::validate() const {
  const double two_s = 2.0 * spin;
  if (!(spin > 0.0) || std::abs(two_s - std::round(two_s)) > 1e-12)
    throw std::invalid_argument("spin must be a positive half-integer or integer");
  if (zfs_d_ghz < 0.0 || zfs_e_ghz < 0.0)
    throw std::invalid_argument("D and E must be non-negative");
  if (zfs_e_ghz > zfs_d_ghz / 3.0 + 1e-12)
    throw std::invalid_argument("E must satisfy 0 <= E <= D/3");
  if (std::abs(zfs_axis.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("zfs_axis must have unit norm");
}

void FieldPoint::validate() const {
  if (std::abs(b1_dir.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("b1_dir must have unit norm");
}

SpinOperators spin_operators(double spin) {
  const double two_s = 2.0 * spin;
  if (!(spin > 0.0) || std::abs(two_s - std::round(two_s)) > 1e-12)
    throw std::domain_error("spin_operators: spin must be a positive half-integer");
  const int n = static_cast<int>(two_s + 1.5);

  Eigen::MatrixXcd sz = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd splus = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = spin - i;  // basis ordered |S>, |S-1>, ..., |-S>
    sz(i, i) = m;
    if (i + 1 < n) {
      const double mlow = spin - (i + 1);
      splus(i, i + 1) = std::sqrt(spin * (spin + 1.0) - mlow * (mlow + 1.0));
    }
  }
  const Eigen::MatrixXcd sminus = splus.adjoint();
  SpinOperators ops;
  ops.sx = 0.5 * (splus + sminus);
  ops.sy = -0.5i * (splus - sminus);
  ops.sz = sz;
  return ops;
}

Eigen::Matrix3d frame_from_axis(const Eigen::Vector3d& axis) {
  const Eigen::Quaterniond q =
      Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), axis);
  Eigen::Matrix3d frame = q.toRotationMatrix();
  frame.col(2) = axis.normalized();
  return frame;
}

Eigen::MatrixXcd build_hamiltonian(const SpinSystem& sys, const FieldPoint& field) {
  sys.validate();
  field.validate();
  const SpinOperators ops = spin_operators(sys.spin);
  const int n = sys.dimension();

  const Eigen::Matrix3d frame = frame_from_axis(sys.zfs_axis);
  const Eigen::Vector3d e1 = frame.col(0), e2 = frame.col(1), e3 = frame.col(2);

  auto along = [&](const Eigen::Vector3d& v) -> Eigen::MatrixXcd {
    return v.x() * ops.sx + v.y() * ops.sy + v.z() * ops.sz;
  };

  const Eigen::MatrixXcd szm = along(e3);
  const Eigen::MatrixXcd sxm = along(e1);
  const Eigen::MatrixXcd sym = along(e2);

  const double ssp1 = sys.spin * (sys.spin + 1.0);
  Eigen::MatrixXcd h =
      sys.zfs_d_ghz * (szm * szm - ssp1 / 3.0 * Eigen::MatrixXcd::Identity(n, n)) +
      sys.zfs_e_ghz * (sxm * sxm - sym * sym) +
      sys.g_factor * constants::mu_bohr_ghz_per_tesla * along(field.b0_tesla);
  // symmetrize away rounding
  h = 0.5 * (h + h.adjoint().eval());
  return h;
}

EigenSystem eigensystem(const Eigen::MatrixXcd& h) {
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::domain_error("eigensystem: input matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigensystem: eigensolver failed");

  EigenSystem es;
  es.energies_ghz = solver.eigenvalues();
  es.states = solver.eigenvectors();

  const int n = static_cast<int>(es.energies_ghz.size());
  const double tol = 1e-9 * scale;

  // Within degenerate groups, order by descending overlap with |m = S>
  // (basis index 0) so |0> vs |+-> labeling is deterministic downstream.
  int i = 0;
  while (i < n) {
    int j = i + 1;
    while (j < n && es.energies_ghz(j) - es.energies_ghz(i) <= tol) ++j;
    if (j - i > 1) {
      std::vector<int> order(j - i);
      for (int k = 0; k < j - i; ++k) order[k] = i + k;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.states(0, a)) > std::abs(es.states(0, b));
      });
      Eigen::MatrixXcd block(n, j - i);
      Eigen::VectorXd energies(j - i);
      for (int k = 0; k < j - i; ++k) {
        block.col(k) = es.states.col(order[k]);
        energies(k) = es.energies_ghz(order[k]);
      }
      es.states.middleCols(i, j - i) = block;
      es.energies_ghz.segment(i, j - i) = energies;
    }
    i = j;
  }

  // Fix phases: largest-magnitude component real and positive.
  for (int c = 0; c < n; ++c) {
    int imax = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(es.states(r, c)) > std::abs(es.states(imax, c))) imax = r;
    const complex<double> z = es.states(imax, c);
    if (std::abs(z) > 0.0) es.states.col(c) *= std::conj(z) / std::abs(z);
  }
  return es;
}

std::vector<Transition> transition_table(const EigenSystem& es, const FieldPoint& field,
                                         double spin, double temperature_k) {
  if (!(temperature_k > 0.0))
    throw std::domain_error("transition_table: temperature must be positive");
  field.validate();

  const SpinOperators ops = spin_operators(spin);
  const Eigen::MatrixXcd drive =
      field.b1_dir.x() * ops.sx + field.b1_dir.y() * ops.sy + field.b1_dir.z() * ops.sz;
  const Eigen::MatrixXcd m = es.states.adjoint() * drive * es.states;

  const int n = static_cast<int>(es.energies_ghz.size());
  const double kt_ghz = constants::boltzmann_ghz_per_kelvin * temperature_k;
  Eigen::VectorXd pops(n);
  const double emin = es.energies_ghz.minCoeff();
  for (int i = 0; i < n; ++i) pops(i) = std::exp(-(es.energies_ghz(i) - emin) / kt_ghz);
  pops /= pops.sum();

  std::vector<Transition> table;
  table.reserve(n * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Transition t;
      t.lower = i;
      t.upper = j;
      t.frequency_ghz = es.energies_ghz(j) - es.energies_ghz(i);
      t.intensity = std::norm(m(i, j));
      t.population_weight = pops(i) - pops(j);
      table.push_back(t);
    }
  }
  return table;
}

std::vector<Transition> transition_table(const SpinSystem& sys, const FieldPoint& field,
                                         double temperature_k) {
  const EigenSystem es = eigensystem(build_hamiltonian(sys, field));
  return transition_table(es, field, sys.spin, temperature_k);
}

}  // namespace spinterface
