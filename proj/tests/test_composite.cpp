#include <doctest.h>

#include <cmath>
#include <random>

#include "kerrcat/composite.hpp"
#include "kerrcat/hilbert.hpp"

using namespace kerrcat;
using namespace kerrcat::composite;

namespace {

const double kK = hzToAngular(1.74e6);

OscillatorParams workingPoint() {
  OscillatorParams p;
  p.K = kK;
  p.eps2 = 2.4 * kK;
  p.delta = 8.0 * kK;
  p.g3 = hzToAngular(-6.5e6);
  p.kappaA = 1.0 / 55.7e-6;
  p.nThA = 0.0;
  return p;
}

CavityParams cavity() {
  CavityParams c;
  c.kappaOut = kTwoPi * 524e3;
  c.kappaLoss = kTwoPi * 157e3;
  c.chiAb = kTwoPi * 180e3;
  return c;
}

}  // namespace

TEST_CASE("projection follows the truncation rule") {
  const auto spec = spectrum::analyzeOscillator(workingPoint(), {45});
  const auto proj = projectOscillator(spec, {45});
  CHECK(proj.dim() >= 8);
  CHECK(proj.dim() == std::max(spec.confinedCount + 2, 8));
  // Kept states are the top of the spectrum.
  CHECK(proj.energies(0) == spec.eigenvalues(0));
  CHECK_THROWS_WITH_AS(projectOscillator(spec, {45}, 60, 2),
                       doctest::Contains("truncation-too-small"), Error);
}

TEST_CASE("cavity dimension rule and composite Hermiticity") {
  CavityParams c = cavity();
  c.nThB = 0.0;
  CHECK(c.effectiveDim() == 2);
  c.nThB = 0.004;
  CHECK(c.effectiveDim() == 3);

  const auto spec = spectrum::analyzeOscillator(workingPoint(), {45});
  DissipationDrive drive{kTwoPi * 166e3, 0.0, {0, 1}};
  const auto cm = buildCoupledModel(workingPoint(), c, drive, spec, {45});
  CHECK(cm.cavityDim == 3);
  const double scale = cm.model.hamiltonian.cwiseAbs().maxCoeff();
  CHECK((cm.model.hamiltonian - cm.model.hamiltonian.adjoint()).cwiseAbs().maxCoeff() <
        1e-12 * scale);
}

TEST_CASE("decoupled limit factorizes the steady state") {
  auto osc = workingPoint();
  osc.nThA = 0.02;
  CavityParams cav = cavity();
  cav.nThB = 0.0;
  const auto spec = spectrum::analyzeOscillator(osc, {45});
  DissipationDrive off{0.0, 0.0, {0, 1}};
  const auto cm = buildCoupledModel(osc, cav, off, spec, {45});
  const auto ssJoint = dynamics::steadyState(cm.model, {0});

  const auto single = oscillatorModel(osc, cm.osc);
  const auto ssOsc = dynamics::steadyState(single, {0});
  Mat cavVac = Mat::Zero(cm.cavityDim, cm.cavityDim);
  cavVac(0, 0) = 1.0;
  const Mat product = hilbert::tensorEmbed(ssOsc.matrix, cavVac);

  // Trace distance = half the nuclear norm of the difference.
  Eigen::SelfAdjointEigenSolver<Mat> es(ssJoint.matrix - product);
  CHECK(0.5 * es.eigenvalues().cwiseAbs().sum() < 1e-8);
}

TEST_CASE("effective dissipators: Lorentzian weights") {
  auto osc = workingPoint();
  CavityParams cav = cavity();
  const auto spec = spectrum::analyzeOscillator(osc, {45});
  const auto proj = projectOscillator(spec, {45});
  const double kb = cav.kappaB();
  const double g = kTwoPi * 100e3;

  auto rateFor = [&](double detuning, int fromManifold, int toManifold, bool heating) {
    DissipationDrive drive{g, detuning, {0, 1}};
    const auto jumps = effectiveDissipators(osc, cav, drive, proj);
    const Mat target = heating
        ? Mat(proj.manifoldProjector(toManifold) * proj.a.adjoint() *
              proj.manifoldProjector(fromManifold))
        : Mat(proj.manifoldProjector(toManifold) * proj.a * proj.manifoldProjector(fromManifold));
    for (const auto& j : jumps)
      if ((j.op - target).norm() < 1e-12 * target.norm()) return j.rate;
    return 0.0;
  };

  SUBCASE("resonant cooling rate is 4 g^2 / kappa_b") {
    cav.nThB = 0.1;
    const double rate = rateFor(0.0, 1, 0, false);
    CHECK(rate == doctest::Approx(4.0 * g * g / kb * 1.1).epsilon(1e-10));
    // Heating partner carries the n_th,b weight.
    const double up = rateFor(0.0, 0, 1, true);
    CHECK(up == doctest::Approx(4.0 * g * g / kb * 0.1).epsilon(1e-10));
  }

  SUBCASE("half-width detuning halves the rate, symmetrically") {
    cav.nThB = 0.0;
    const double r0 = rateFor(0.0, 1, 0, false);
    const double rPlus = rateFor(0.5 * kb, 1, 0, false);
    const double rMinus = rateFor(-0.5 * kb, 1, 0, false);
    CHECK(rPlus == doctest::Approx(0.5 * r0).epsilon(1e-10));
    CHECK(rMinus == doctest::Approx(rPlus).epsilon(1e-10));
  }

  SUBCASE("the qubit-manifold rate is suppressed by the squared gap ratio") {
    cav.nThB = 0.0;
    const double r0 = rateFor(0.0, 1, 0, false);
    const double rPhase = rateFor(0.0, 0, 0, false);
    const double w01 = spec.transitionFrequency(0, 1);
    const double expected = (0.25 * kb * kb) / (0.25 * kb * kb + w01 * w01);
    CHECK(rPhase / r0 == doctest::Approx(expected).epsilon(1e-6));
    CHECK(rPhase / r0 < 2e-4);
    // Frozen magnitude of the suppression ratio at the working point.
    CHECK(rPhase / r0 == doctest::Approx(1.73e-4).epsilon(0.05));
  }

  SUBCASE("adiabatic-elimination guard") {
    DissipationDrive tooStrong{1.5 * kb, 0.0, {0, 1}};
    CHECK_THROWS_WITH_AS(effectiveDissipators(osc, cav, tooStrong, proj),
                         doctest::Contains("invalid-params"), Error);
  }
}

TEST_CASE("analytic two-mode decay") {
  TwoModeDecayParams p;
  p.g = kTwoPi * 300e3;
  p.kappaA = 1.0 / 55.7e-6;
  p.kappaB = kTwoPi * 681e3;

  CHECK(analyticTwoModeDecay(p, 0.0).nbarA == doctest::Approx(1.0).epsilon(1e-14));

  TwoModeDecayParams decoupled = p;
  decoupled.g = 0;
  for (double t : {0.3e-6, 2e-6, 9e-6})
    CHECK(analyticTwoModeDecay(decoupled, t).nbarA ==
          doctest::Approx(std::exp(-p.kappaA * t)).epsilon(1e-12));

  // Underdamped case against a numeric Lindblad oracle on the
  // single-excitation subspace (2 x 2 Fock factors are exact there).
  SUBCASE("underdamped oracle") {
    REQUIRE(16 * p.g * p.g > (p.kappaB - p.kappaA) * (p.kappaB - p.kappaA));
    const Mat a2 = hilbert::buildFockOperators({2}).annihilation;
    const Mat eye = Mat::Identity(2, 2);
    const Mat aFull = hilbert::tensorEmbed(a2, eye);
    const Mat bFull = hilbert::tensorEmbed(eye, a2);
    dynamics::LindbladModel m;
    m.hamiltonian = p.g * (aFull * bFull.adjoint() + aFull.adjoint() * bFull);
    m.jumps = {{p.kappaA, aFull}, {p.kappaB, bFull}};
    Mat rho0 = Mat::Zero(4, 4);
    rho0(2, 2) = 1.0;  // |1>_a |0>_b
    std::vector<double> times;
    for (int k = 0; k < 50; ++k) times.push_back(6e-6 * k / 49.0);
    const auto states = dynamics::evolve(m, {rho0, "composite", {2, 2}}, times);
    for (size_t k = 0; k < times.size(); ++k) {
      const double nA = (aFull.adjoint() * aFull * states[k].matrix).trace().real();
      const auto closed = analyticTwoModeDecay(p, times[k]);
      CHECK(std::abs(nA - closed.nbarA) < 1e-8);
      const double nB = (bFull.adjoint() * bFull * states[k].matrix).trace().real();
      CHECK(std::abs(nB - std::norm(closed.amplitudeB)) < 1e-8);
    }
  }
}

TEST_CASE("g_diss recovery from decay traces") {
  const double kappaA = 1.0 / 55.7e-6, kappaB = kTwoPi * 681e3;
  const double gTrue = kTwoPi * 800e3;
  TwoModeDecayParams p{gTrue, kappaA, kappaB};

  RealVec t(60), clean(60);
  for (int k = 0; k < 60; ++k) {
    t(k) = 6e-6 * k / 59.0;
    clean(k) = 0.8 * analyticTwoModeDecay(p, t(k)).nbarA + 0.1;
  }

  SUBCASE("noiseless trace recovers g exactly") {
    auto res = fitGdissFromDecay({{t, clean}}, kappaA, kappaB);
    CHECK(std::abs(res[0].value("g") - gTrue) < 1e-6 * gTrue);
  }

  SUBCASE("1% noise keeps g within 3 sigma") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0.0, 0.008);
    RealVec noisy = clean;
    for (int k = 0; k < 60; ++k) noisy(k) += noise(rng);
    auto res = fitGdissFromDecay({{t, noisy}}, kappaA, kappaB);
    CHECK(std::abs(res[0].value("g") - gTrue) < 3 * res[0].error("g"));
  }

  SUBCASE("flat trace is rejected") {
    RealVec flat = RealVec::Constant(60, 0.4);
    CHECK_THROWS_WITH_AS(fitGdissFromDecay({{t, flat}}, kappaA, kappaB),
                         doctest::Contains("fit-failure"), Error);
  }
}

TEST_CASE("kappa_diss extraction against the adiabatic formula") {
  auto osc = workingPoint();
  CavityParams cav = cavity();
  const auto spec = spectrum::analyzeOscillator(osc, {45});
  const double kb = cav.kappaB();

  // Weak coupling: 1/e rate within 10% of 4 g^2 / kappa_b.
  const double g = kb / 12.0;
  DissipationDrive drive{g, 0.0, {0, 1}};
  const double kd = extractKappaDiss(osc, cav, drive, spec, {45});
  CHECK(kd == doctest::Approx(4 * g * g / kb).epsilon(0.10));
}

TEST_CASE("effective model matches the full model steady state at moderate coupling") {
  auto osc = workingPoint();
  osc.nThA = 0.025;
  CavityParams cav = cavity();
  cav.nThB = 0.01;
  const auto spec = spectrum::analyzeOscillator(osc, {45});
  DissipationDrive drive{0.25 * cav.kappaB(), 0.0, {0, 1}};

  const auto cm = buildCoupledModel(osc, cav, drive, spec, {45});
  const auto ssFull = dynamics::steadyState(cm.model, {0});
  const Mat rhoOsc = cm.reduceToOscillator(ssFull.matrix);

  auto effModel = oscillatorModel(osc, cm.osc);
  for (auto& j : effectiveDissipators(osc, cav, drive, cm.osc)) effModel.jumps.push_back(j);
  const auto ssEff = dynamics::steadyState(effModel, {0});

  for (int manifold : {1, 2}) {
    double pFull = 0, pEff = 0;
    for (int k = 0; k < cm.osc.dim(); ++k) {
      if (cm.osc.labels[k].manifold != manifold) continue;
      pFull += rhoOsc(k, k).real();
      pEff += ssEff.matrix(k, k).real();
    }
    CHECK(pEff == doctest::Approx(pFull).epsilon(0.10));
  }
}

TEST_CASE("Z observable on |+Z> (x) vacuum reads +1") {
  const auto osc = workingPoint();
  const auto spec = spectrum::analyzeOscillator(osc, {45});
  DissipationDrive drive{kTwoPi * 166e3, 0.0, {0, 1}};
  const auto cm = buildCoupledModel(osc, cavity(), drive, spec, {45});
  const int nb = cm.cavityDim;
  const int ip = cm.osc.stateIndex(0, +1), im = cm.osc.stateIndex(0, -1);
  Vec plusZ = Vec::Zero(cm.dim());
  plusZ(ip * nb) = 1.0 / std::sqrt(2.0);
  plusZ(im * nb) = 1.0 / std::sqrt(2.0);
  Mat oz = Mat::Zero(cm.osc.dim(), cm.osc.dim());
  oz(ip, im) = oz(im, ip) = 1.0;
  const dynamics::DensityState state{plusZ * plusZ.adjoint(), "composite",
                                     {cm.osc.dim(), nb}};
  const auto z = dynamics::expectation(state, cm.oscillatorObservable(oz));
  CHECK(z.real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(z.imag()) < 1e-12);
}
