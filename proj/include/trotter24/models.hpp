#pragma once

// Built-in benchmark models.

#include "trotter24/formulas.hpp"
#include "trotter24/pauli.hpp"

namespace trotter24 {

struct IsingCouplings {
  double j_z = -1.0;
  double h_z = 0.2;
  double h_x = -2.0;
};

/// A = h_x sum_j X_j.
PauliSum ising_field_part(int num_sites, const IsingCouplings& c = {});
/// B = sum_j (J_z Z_j Z_{j+1} + h_z Z_j) on a periodic ring.
PauliSum ising_bond_part(int num_sites, const IsingCouplings& c = {});

/// H = A + B.
SplitHamiltonian ising_x(int num_sites, const IsingCouplings& c = {});
/// H(t) = t A + B.
SplitHamiltonian ising_ramp(int num_sites, const IsingCouplings& c = {});

/// (1/L) sum_j sigma^axis_j for axis in {'X', 'Y', 'Z'}.
PauliSum magnetization(int num_sites, char axis);

}  // namespace trotter24
