#include "trotter24/models.hpp"

#include <stdexcept>

namespace trotter24 {

PauliSum ising_field_part(int num_sites, const IsingCouplings& c) {
  if (num_sites < 1) throw std::invalid_argument("Ising model needs at least one site");
  PauliSum a(num_sites);
  for (int j = 0; j < num_sites; ++j) a.add(PauliString::single(j, 'X'), c.h_x);
  return a;
}

PauliSum ising_bond_part(int num_sites, const IsingCouplings& c) {
  if (num_sites < 1) throw std::invalid_argument("Ising model needs at least one site");
  PauliSum b(num_sites);
  for (int j = 0; j < num_sites; ++j) {
    const int next = (j + 1) % num_sites;
    b.add(PauliString::single(j, 'Z') * PauliString::single(next, 'Z'), c.j_z);
    b.add(PauliString::single(j, 'Z'), c.h_z);
  }
  return b;
}

SplitHamiltonian ising_x(int num_sites, const IsingCouplings& c) {
  return SplitHamiltonian(ising_field_part(num_sites, c), ising_bond_part(num_sites, c));
}

SplitHamiltonian ising_ramp(int num_sites, const IsingCouplings& c) {
  return SplitHamiltonian(ising_field_part(num_sites, c), ising_bond_part(num_sites, c), Modulation::linear(1.0, 0.0),
                          Modulation::constant(1.0));
}

PauliSum magnetization(int num_sites, char axis) {
  PauliSum m(num_sites);
  for (int j = 0; j < num_sites; ++j) m.add(PauliString::single(j, axis), 1.0 / num_sites);
  return m;
}

}  // namespace trotter24
