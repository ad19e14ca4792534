#pragma once

#include <vector>

#include "kerrcat/common.hpp"

namespace kerrcat::hilbert {

/// Truncated Fock space of a single bosonic mode.
struct FockSpace {
  int dim = 2;
};

struct FockOperators {
  Mat annihilation;
  Mat number;
  Mat parity;
};

/// Ladder, number and parity operators on the truncated space.
/// annihilation has sqrt(n) on the superdiagonal, number = diag(0..dim-1),
/// parity = diag((-1)^n); all entries exactly representable.
FockOperators buildFockOperators(const FockSpace& space);

/// D(beta) = exp(beta a^dag - conj(beta) a), computed from the spectral
/// decomposition of the Hermitian generator so the result stays unitary.
/// Warns when |beta|^2 exceeds dim/4 (truncation headroom).
Mat displacementOperator(const FockSpace& space, PhaseSpacePoint beta);

/// W(beta) = (2/pi) Tr[D(beta) rho D(beta)^dag P] evaluated on a grid.
/// rho must be a valid density matrix on a single Fock factor.
std::vector<double> wignerFunction(const Mat& rho, const std::vector<PhaseSpacePoint>& grid);

/// Kronecker product with factor-A-major ordering:
/// (A (x) B)[i*rowsB + k, j*colsB + l] = A(i,j) B(k,l). Inputs must be square.
Mat tensorEmbed(const Mat& opA, const Mat& opB);

}  // namespace kerrcat::hilbert
