#pragma once

#include <vector>

#include "kerrcat/common.hpp"
#include "kerrcat/hilbert.hpp"

namespace kerrcat::spectrum {

using hilbert::FockSpace;

/// Physical rates and drive settings of the driven nonlinear oscillator.
/// All frequencies/rates are angular (rad/s); thermal numbers dimensionless.
struct OscillatorParams {
  double K = 0;       ///< Kerr nonlinearity, > 0
  double eps2 = 0;    ///< two-photon drive amplitude
  double delta = 0;   ///< drive detuning
  double g3 = 0;      ///< third-order nonlinearity (may be negative); 0 means "no Stark input"
  double xiZro = 0;   ///< extra pump displacement entering the Stark shift
  double kappaA = 0;  ///< single-photon loss rate (1/s)
  double nThA = 0;    ///< oscillator thermal photon number

  void validate() const;
  /// Pump-induced displacement eps2 / (3 g3); 0 when g3 == 0.
  double xiSq() const { return g3 != 0.0 ? eps2 / (3.0 * g3) : 0.0; }
  /// delta - 4K(|xiSq|^2 + |xiZro|^2), the number-operator coefficient.
  double effectiveDetuning() const {
    return delta - 4.0 * K * (xiSq() * xiSq() + xiZro * xiZro);
  }
};

/// Classical features of E(beta) = delta |b|^2 - K |b|^4 + eps2 (b^2 + b*^2).
struct Metapotential {
  double wellAmplitude = 0;  ///< alpha_Delta, real well position
  double wellEnergy = 0;
  double saddleEnergy = 0;
  PhaseSpacePoint saddleLocation{0, 0};
};

struct StateLabel {
  int manifold = -1;
  int parity = 0;  ///< +1 or -1
};

/// Eigen-decomposition of the driven oscillator, sorted by descending
/// eigenvalue (the confined states sit at the top of the quasienergy
/// spectrum), with states grouped into parity-paired manifolds.
struct ManifoldSpectrum {
  RealVec eigenvalues;       ///< descending
  Mat eigenvectors;          ///< columns match eigenvalues
  std::vector<StateLabel> labels;
  RealVec splittings;        ///< Delta E_i = |E_i^+ - E_i^-| per complete pair
  RealVec pairMeanEnergies;  ///< (E_i^+ + E_i^-)/2 per complete pair
  RealVec meanPhotons;       ///< <n> per state
  int confinedCount = 0;     ///< states with eigenvalue above the saddle energy

  int pairCount() const { return int(splittings.size()); }
  /// omega_ij = mean(E_j) - mean(E_i); omega_01 is negative at the usual
  /// working points.
  double transitionFrequency(int i, int j) const {
    return pairMeanEnergies[j] - pairMeanEnergies[i];
  }
  /// Column index of |psi_i^parity>.
  int stateIndex(int manifold, int parity) const;
  /// Eigenvector of |psi_i^parity>.
  Vec state(int manifold, int parity) const { return eigenvectors.col(stateIndex(manifold, parity)); }
};

struct KcqBasis {
  Vec plusZ, minusZ, plusX, minusX, plusY, minusY;
};

/// H = (delta - 4K(|xi_sq|^2 + |xi_zro|^2)) n - K a^dag2 a^2 + eps2 (a^2 + a^dag2).
/// With g3 == 0 the Stark term is undefined; the caller must acknowledge
/// explicitly, otherwise this throws missing-stark-input.
Mat buildKcqHamiltonian(const OscillatorParams& p, const FockSpace& space,
                        bool acknowledgeNoStark = false);

/// Stationary structure of the classical quasienergy surface, with the bare
/// detuning as given (no Stark shift folded in).
Metapotential metapotentialGeometry(const OscillatorParams& p);

/// Diagonalize a parity-commuting Hermitian H and classify states into
/// manifolds: the k-th even-parity and k-th odd-parity states in descending
/// energy order form manifold k.
ManifoldSpectrum diagonalizeAndClassify(const Mat& h, const FockSpace& space,
                                        const Metapotential& meta);

/// Convenience: Hamiltonian + metapotential + classification in one call.
ManifoldSpectrum analyzeOscillator(const OscillatorParams& p, const FockSpace& space,
                                   bool acknowledgeNoStark = false);

/// |+-Z> = (psi0+ +- psi0-)/sqrt2, |+-X> = psi0^{+-},
/// |+-Y> = (psi0+ -+ i psi0-)/sqrt2, with the global phase of each psi0^{+-}
/// fixed so its largest-magnitude Fock amplitude is real positive.
KcqBasis kcqBasisStates(const ManifoldSpectrum& spec);

/// eps2 such that DeltaE_manifold(eps2, delta) matches `target` to 1e-3
/// relative, found by bisection over [eps2Lo, eps2Hi]. DeltaE must be
/// monotone decreasing over the bracket (checked numerically).
double splittingIsoline(double target, double delta, const OscillatorParams& base,
                        const FockSpace& space, double eps2Lo, double eps2Hi,
                        int manifold = 1, bool acknowledgeNoStark = false);

/// CSV export, columns: index,manifold,parity,energy_over_h_Hz,mean_photon.
std::string spectrumCsv(const ManifoldSpectrum& spec);

}  // namespace kerrcat::spectrum
