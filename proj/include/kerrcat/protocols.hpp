#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kerrcat/composite.hpp"
#include "kerrcat/dynamics.hpp"
#include "kerrcat/fitting.hpp"

namespace kerrcat::protocols {

using composite::CavityParams;
using composite::DissipationDrive;
using composite::ProjectedOscillator;
using spectrum::FockSpace;
using spectrum::ManifoldSpectrum;
using spectrum::OscillatorParams;

/// Effective rates (1/s) of the three-manifold decoherence model.
struct DecoherenceRates {
  double k1_01 = 0;
  double k1_12 = 0;
  double kphi_01 = 0;
  double kphi_12 = 0;
  double kup_01 = 0;
  double kup_12 = 0;

  void validate() const;
};

/// Readout values (reflected-phase radians) per manifold.
struct ReadoutContrasts {
  double m0 = 0, m1 = 0, m2 = 0, m3 = 0;
  double operator[](int i) const;
};

struct PopulationEstimate {
  double p0 = 0, p1 = 0, p2 = 0;
  double sigma0 = 0, sigma1 = 0, sigma2 = 0;
};

/// One-port reflection readout: S11(w) = 1 - kappa_out/(i(w - w_i) + kappa_tot/2)
/// with the manifold-i resonance pulled by chi_ab * nbar_i; contrasts are the
/// reflected phases probed at the manifold-0 resonance (plus probeOffset).
ReadoutContrasts cavityReadoutModel(const CavityParams& cav, const ManifoldSpectrum& spec,
                                    double probeOffset = 0);

struct CoherenceSignals {
  std::vector<double> t1_01, tphi_01, t1_12, tphi_12;
};

/// Closed-form relaxation and Ramsey readout signals of the three-manifold
/// model, including the double-exponential cascade through manifold 1.
CoherenceSignals manifoldCoherenceSignals(const DecoherenceRates& rates,
                                          const ReadoutContrasts& contrasts, double deltaOmega,
                                          const std::vector<double>& times);

struct RabiContrastSettings {
  double pulseLength = 2e-6;  ///< s, total Gaussian pulse length
  double pulseSigma = 332e-9; ///< s
  bool fullPropagation = false;  ///< carrier-resolved cross-check mode
  double reducedGuardSplitting = kTwoPi * 500e3;  ///< refuse reduced model above this DeltaE
};

struct RabiContrastTraces {
  std::vector<double> amplitudes;  ///< drive amplitude in (1<->2) pi-pulse units
  std::vector<double> withPi01;
  std::vector<double> withoutPi01;
};

/// Rabi-oscillation traces of the (1<->2) transition versus pulse amplitude,
/// with and without a calibrated pi pulse on (0<->1) first, starting from the
/// given manifold populations. Default engine is the rotating-frame reduction
/// on the three lowest manifolds.
RabiContrastTraces rabiContrastProtocol(const ProjectedOscillator& proj,
                                        const DecoherenceRates& rates,
                                        const PopulationEstimate& trueP,
                                        const ReadoutContrasts& contrasts,
                                        const std::vector<double>& amplitudes,
                                        const RabiContrastSettings& settings = {});

enum class LeakageFitMode { amplitudeRatio, fullModel };

/// Extract p1 from Rabi-contrast traces. fullModel refits the protocol
/// simulation with (p1, M0, M1, M2) free and rates fixed; amplitudeRatio uses
/// damped-sinusoid amplitudes. p2 uncertainty is propagated by Monte Carlo
/// with the law of total variance.
PopulationEstimate fitLeakagePopulation(const RabiContrastTraces& data,
                                        const ProjectedOscillator& proj,
                                        const DecoherenceRates& rates, double p2, double p2Sigma,
                                        LeakageFitMode mode,
                                        const RabiContrastSettings& settings = {},
                                        int mcSamples = 400, std::uint64_t seed = 1,
                                        int jobs = 1);

struct SpectroscopyPeaks {
  double pk01 = 0, pk12 = 0, pk23 = 0;     ///< readout-contrast steps
  double sigma01 = 0, sigma12 = 0, sigma23 = 0;
};

/// Invert relative spectroscopy contrasts into manifold populations using the
/// sum rule and the two ratio equations; Gaussian peak uncertainties are
/// propagated by Monte Carlo.
PopulationEstimate spectroscopyInversion(const SpectroscopyPeaks& peaks,
                                         const ReadoutContrasts& contrasts, int nSamples,
                                         std::uint64_t seed = 1, int jobs = 1);

struct LeakagePoint {
  double gDiss = 0;
  double p1 = 0;
  double p2 = 0;
};

/// Steady state of the coupled model per g_diss, followed by free decay with
/// the exchange off for tauDelay, then manifold populations of the reduced
/// oscillator state.
std::vector<LeakagePoint> steadyLeakageVsDissipation(const OscillatorParams& osc,
                                                     const CavityParams& cav,
                                                     const std::vector<double>& gDissGrid,
                                                     const ManifoldSpectrum& spec,
                                                     const FockSpace& space,
                                                     double tauDelay = 4.2e-6, int jobs = 1);

/// Steady-state manifold populations with a dephasing jump sqrt(kphi) a^dag a
/// added to the single-mode model.
std::pair<double, double> dephasingEquivalentHeating(const OscillatorParams& osc,
                                                     const ProjectedOscillator& proj,
                                                     double kphi);

struct ThresholdScanResult {
  double delta = 0;
  std::vector<double> eps2Grid;      ///< rad/s
  std::vector<double> detuningGrid;  ///< delta-omega_diss, rad/s
  RealMat deltaZ;                    ///< rows = eps2, cols = detuning
  RealVec peakAmplitude;             ///< fitted Lorentzian peak per eps2 row
  std::vector<std::string> rowDiagnostics;
  /// Smallest grid eps2 where dissipation no longer reduces T_Z.
  double eps2Th = 0;
  /// Interpolated zero of the fitted peak amplitude, for continuous use.
  double eps2Crossing = 0;
  enum class Regime { signChange, saturation } regime = Regime::signChange;
};

/// Z-contrast change after a fixed evolution from |+Z> (x) |0>, normalized to
/// the value at the reference detuning (first entry of detuningGrid); the
/// threshold comes from the sign change of the fitted Lorentzian peak, or
/// from the peak dropping below the row noise floor (saturation regime).
ThresholdScanResult bitFlipScan(const OscillatorParams& oscBase,
                                const std::vector<double>& eps2Grid, const CavityParams& cav,
                                const DissipationDrive& drive,
                                const std::vector<double>& detuningGrid, const FockSpace& space,
                                double duration = 50e-6, int jobs = 1);

struct BitFlipTime {
  double tz = 0;  ///< s
  std::string method = "spectral";
  std::optional<double> tzTimeDomain;  ///< cross-check value when requested
};

struct TzThreshold {
  /// Smallest grid eps2 with T_Z(with) >= T_Z(without).
  double eps2Th = 0;
  /// Interpolated unity crossing of the T_Z ratio.
  double eps2Crossing = 0;
  std::vector<double> eps2Grid;
  std::vector<double> tzWith, tzWithout;
};

/// Smallest eps2 where T_Z with resonant dissipation overtakes T_Z without,
/// from spectral rates on an eps2 grid. useEffectiveModel swaps the explicit
/// cavity for the adiabatic-elimination dissipators.
TzThreshold thresholdFromTzCrossing(const OscillatorParams& oscBase, const CavityParams& cav,
                                    const DissipationDrive& drive,
                                    const std::vector<double>& eps2Grid, const FockSpace& space,
                                    bool useEffectiveModel, int jobs = 1);

/// T_Z from the slowest O_Z-overlapping Liouvillian mode; `drive` absent means
/// the bare oscillator (identical truncation either way). The time-domain
/// cross-check fits <Z>(t) with an exponential.
BitFlipTime bitFlipTime(const OscillatorParams& osc, const CavityParams& cav,
                        const std::optional<DissipationDrive>& drive,
                        const ManifoldSpectrum& spec, const FockSpace& space,
                        bool crossCheck = false);

/// Lossless ramp of the two-photon drive (and optionally the detuning) from
/// vacuum; returns the final overlap with the manifold-0 pair of the target
/// Hamiltonian.
double initializationRamp(const OscillatorParams& target, const dynamics::RampProfile& eps2Ramp,
                          const dynamics::RampProfile& deltaRamp, bool withDetuningRamp,
                          const FockSpace& space);

/// Uhlmann fidelity between the lossy and unitary evolutions of |+Z><+Z|
/// under the bare Kerr Hamiltonian for a gate time tau.
double kerrGateFidelity(double k1Eff, double kphiEff, double tau, double kerr,
                        const ManifoldSpectrum& spec, int gateDim = 26);

/// xi_Z = (1 - exp(-gamma tau)) / 2.
double zGateError(double gammaRabi, double tau);

struct ReadoutQuality {
  double fidelity = 0;
  double qndness = 0;
};

/// F = 1 - p(+|-) - p(-|+), Q = (p(+|+) + p(-|-)) / 2 from two aligned shot
/// records classified against `threshold`.
ReadoutQuality zroFidelityQnd(const std::vector<double>& firstShots,
                              const std::vector<double>& secondShots, double threshold);

struct RobustnessReport {
  DecoherenceRates setRates;
  DecoherenceRates fittedRates;  ///< heating-free fits
  double relErrK1_01 = 0, relErrK1_12 = 0, relErrKphi_01 = 0, relErrKphi_12 = 0;
  double p1True = 0;
  double p1ByRatio = 0, p1ByRatioSigma = 0;
  double p1ByModel = 0, p1ByModelSigma = 0;
};

/// Three-level study of the bias introduced by neglecting excitation: decay
/// and Ramsey datasets are generated with heating on, fitted with the
/// heating-free forms, and the two p1 estimators are compared against the
/// steady-state truth.
RobustnessReport excitationRobustnessStudy(const DecoherenceRates& rates,
                                           const ReadoutContrasts& contrasts);

}  // namespace kerrcat::protocols
