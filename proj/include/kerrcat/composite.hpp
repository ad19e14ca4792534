#pragma once

#include <utility>
#include <vector>

#include "kerrcat/dynamics.hpp"
#include "kerrcat/fitting.hpp"
#include "kerrcat/spectrum.hpp"

namespace kerrcat::composite {

using spectrum::ManifoldSpectrum;
using spectrum::OscillatorParams;

/// Readout cavity: rates in 1/s, dispersive shift in rad/s.
struct CavityParams {
  double kappaOut = 0;
  double kappaLoss = 0;
  double nThB = 0;
  double chiAb = 0;
  int cavityDim = 0;  ///< 0 = automatic: 3 Fock states when nThB > 0, else 2

  double kappaB() const { return kappaOut + kappaLoss; }
  int effectiveDim() const;
  void validate() const;
};

struct DissipationDrive {
  double gDiss = 0;     ///< exchange rate, rad/s
  double detuning = 0;  ///< delta-omega_diss, rad/s
  std::pair<int, int> targetTransition{0, 1};
};

/// Linear two-mode decay, SI-style closed form.
struct TwoModeDecayParams {
  double g = 0;       ///< rad/s
  double kappaA = 0;  ///< 1/s
  double kappaB = 0;  ///< 1/s

  double kappaTot() const { return 0.25 * (kappaA + kappaB); }
  Complex lambda() const {
    const double d = kappaB - kappaA;
    return std::sqrt(Complex(d * d - 16.0 * g * g, 0.0));
  }
};

/// Oscillator restricted to its highest (confined) eigenstates, following the
/// truncation rule: confined states plus two, at least eight in total.
struct ProjectedOscillator {
  Mat basis;             ///< fockDim x keep, columns = kept eigenvectors (descending)
  RealVec energies;      ///< kept eigenvalues
  Mat a;                 ///< annihilation operator in the kept basis
  Mat number;            ///< a^dag a in the kept basis
  std::vector<spectrum::StateLabel> labels;
  Eigen::VectorXi parity;  ///< +-1 per kept state
  RealVec pairMeanEnergies;

  int dim() const { return int(energies.size()); }
  Mat manifoldProjector(int manifold) const;
  int stateIndex(int manifold, int parity) const;
  double transitionFrequency(int i, int j) const {
    return pairMeanEnergies[j] - pairMeanEnergies[i];
  }
};

ProjectedOscillator projectOscillator(const ManifoldSpectrum& spec,
                                      const spectrum::FockSpace& space, int minStates = 8,
                                      int extraStates = 2);

/// Single-mode Lindblad model in the projected eigenbasis with the thermal
/// loss channels of the oscillator.
dynamics::LindbladModel oscillatorModel(const OscillatorParams& osc,
                                        const ProjectedOscillator& proj);

/// Oscillator (x) cavity model with exchange interaction and thermal loss on
/// both modes. The cavity detuning absorbs the drive frequency:
/// Delta_b = omega_target + detuning.
struct CompositeModel {
  dynamics::LindbladModel model;
  ProjectedOscillator osc;
  int cavityDim = 0;
  Eigen::VectorXi stateParity;  ///< joint parity per composite basis state

  int dim() const { return model.dim(); }
  /// opOsc (projected basis) acting on the composite space.
  Mat oscillatorObservable(const Mat& opOsc) const;
  /// rho on the composite space reduced to the oscillator factor.
  Mat reduceToOscillator(const Mat& rho) const;
};

CompositeModel buildCoupledModel(const OscillatorParams& osc, const CavityParams& cav,
                                 const DissipationDrive& drive, const ManifoldSpectrum& spec,
                                 const spectrum::FockSpace& space);

/// Adiabatic elimination of the cavity: Lorentzian-weighted transition
/// dissipators on the oscillator alone. Pairs run over all complete
/// manifolds in the projection; rates follow
///   kappa_b g^2 / (kappa_b^2/4 + (Delta_b - (E_i - E_j))^2)
/// with cooling jump P_j a P_i (weight 1 + n_th,b) and heating jump
/// P_i a^dag P_j (weight n_th,b).
std::vector<dynamics::Jump> effectiveDissipators(const OscillatorParams& osc,
                                                 const CavityParams& cav,
                                                 const DissipationDrive& drive,
                                                 const ProjectedOscillator& proj);

/// 1/e decay rate of the resonantly cooled manifold population, from full
/// composite propagation with kappa_a and thermal numbers set to zero.
/// Sampling: t = 0 plus 200 log-spaced times up to 10 / (4 g^2 / kappa_b),
/// linear interpolation at the crossing.
double extractKappaDiss(const OscillatorParams& osc, const CavityParams& cav,
                        const DissipationDrive& drive, const ManifoldSpectrum& spec,
                        const spectrum::FockSpace& space);

struct TwoModeAmplitudes {
  double nbarA = 0;      ///< |a(t)/a0|^2
  Complex amplitudeB{0, 0};  ///< b(t)/a0
};

/// Closed-form relative amplitudes of two linearly coupled decaying modes,
/// a(0) = a0, b(0) = 0; hyperbolic functions of complex argument throughout.
TwoModeAmplitudes analyticTwoModeDecay(const TwoModeDecayParams& p, double t);

/// Least-squares fit of scale * nbarA(t; g) + offset per trace.
std::vector<fitting::FitResult> fitGdissFromDecay(
    const std::vector<std::pair<RealVec, RealVec>>& traces, double kappaA, double kappaB);

}  // namespace kerrcat::composite
