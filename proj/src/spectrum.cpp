#include "kerrcat/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kerrcat::spectrum {

void OscillatorParams::validate() const {
  if (!(K > 0)) fail("invalid-params", "K must be positive");
  if (kappaA < 0) fail("invalid-params", "kappaA must be >= 0");
  if (nThA < 0) fail("invalid-params", "nThA must be >= 0");
  if (eps2 < 0) fail("invalid-params", "eps2 must be >= 0");
}

Mat buildKcqHamiltonian(const OscillatorParams& p, const FockSpace& space,
                        bool acknowledgeNoStark) {
  p.validate();
  if (p.g3 == 0.0 && !acknowledgeNoStark)
    fail("missing-stark-input",
         "g3 is zero so the Stark shift is undefined; pass acknowledgeNoStark to proceed");
  const auto ops = hilbert::buildFockOperators(space);
  const Mat& a = ops.annihilation;
  const Mat ad = a.adjoint();
  Mat h = p.effectiveDetuning() * ops.number - p.K * (ad * ad * a * a) +
          p.eps2 * (a * a + ad * ad);
  return 0.5 * (h + Mat(h.adjoint()));
}

Metapotential metapotentialGeometry(const OscillatorParams& p) {
  p.validate();
  Metapotential meta;
  const double wellSq = (p.delta + 2.0 * p.eps2) / (2.0 * p.K);
  meta.wellAmplitude = wellSq > 0 ? std::sqrt(wellSq) : 0.0;
  meta.wellEnergy = wellSq > 0 ? (p.delta + 2.0 * p.eps2) * (p.delta + 2.0 * p.eps2) / (4.0 * p.K) : 0.0;
  if (p.delta > 2.0 * p.eps2) {
    const double ySq = (p.delta - 2.0 * p.eps2) / (2.0 * p.K);
    meta.saddleEnergy = (p.delta - 2.0 * p.eps2) * (p.delta - 2.0 * p.eps2) / (4.0 * p.K);
    meta.saddleLocation = PhaseSpacePoint(0.0, std::sqrt(ySq));
  } else {
    meta.saddleEnergy = 0.0;
    meta.saddleLocation = PhaseSpacePoint(0.0, 0.0);
  }
  return meta;
}

namespace {

// Indices of even/odd Fock states; H must not couple the two blocks.
void checkParityCommutes(const Mat& h, const Mat& parity) {
  const Mat comm = h * parity - parity * h;
  const double scale = h.cwiseAbs().maxCoeff();
  if (scale > 0 && comm.cwiseAbs().maxCoeff() > 1e-10 * scale)
    fail("parity-mixing", "Hamiltonian does not commute with parity");
}

}  // namespace

ManifoldSpectrum diagonalizeAndClassify(const Mat& h, const FockSpace& space,
                                        const Metapotential& meta) {
  const int d = space.dim;
  if (h.rows() != d || h.cols() != d) fail("invalid-shape", "Hamiltonian dimension mismatch");
  if (!isHermitian(h, 1e-12)) fail("invalid-state", "Hamiltonian is not Hermitian");
  const auto ops = hilbert::buildFockOperators(space);
  checkParityCommutes(h, ops.parity);

  // Diagonalize each parity block separately; eigenstates then carry exact
  // parity even when a pair is numerically degenerate.
  std::vector<int> evenIdx, oddIdx;
  for (int n = 0; n < d; ++n) (n % 2 == 0 ? evenIdx : oddIdx).push_back(n);

  struct Entry {
    double energy;
    int parity;
    Vec vec;
  };
  std::vector<Entry> entries;
  entries.reserve(d);
  for (int sector = 0; sector < 2; ++sector) {
    const auto& idx = sector == 0 ? evenIdx : oddIdx;
    const int nb = int(idx.size());
    Mat block(nb, nb);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) block(i, j) = h(idx[i], idx[j]);
    Eigen::SelfAdjointEigenSolver<Mat> es(block);
    for (int k = 0; k < nb; ++k) {
      Vec full = Vec::Zero(d);
      for (int i = 0; i < nb; ++i) full(idx[i]) = es.eigenvectors()(i, k);
      entries.push_back({es.eigenvalues()(k), sector == 0 ? +1 : -1, std::move(full)});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.energy > b.energy; });

  ManifoldSpectrum spec;
  spec.eigenvalues.resize(d);
  spec.eigenvectors.resize(d, d);
  spec.labels.resize(d);
  spec.meanPhotons.resize(d);
  int evenSeen = 0, oddSeen = 0;
  for (int k = 0; k < d; ++k) {
    spec.eigenvalues(k) = entries[k].energy;
    spec.eigenvectors.col(k) = entries[k].vec;
    const int manifold = entries[k].parity > 0 ? evenSeen++ : oddSeen++;
    spec.labels[k] = {manifold, entries[k].parity};
    spec.meanPhotons(k) = (entries[k].vec.adjoint() * ops.number * entries[k].vec)(0).real();
  }

  const int pairs = std::min(evenSeen, oddSeen);
  spec.splittings.resize(pairs);
  spec.pairMeanEnergies.resize(pairs);
  for (int i = 0; i < pairs; ++i) {
    const double ep = spec.eigenvalues(spec.stateIndex(i, +1));
    const double em = spec.eigenvalues(spec.stateIndex(i, -1));
    spec.splittings(i) = std::abs(ep - em);
    spec.pairMeanEnergies(i) = 0.5 * (ep + em);
  }
  spec.confinedCount = 0;
  for (int k = 0; k < d; ++k)
    if (spec.eigenvalues(k) > meta.saddleEnergy) ++spec.confinedCount;
  return spec;
}

int ManifoldSpectrum::stateIndex(int manifold, int parity) const {
  for (int k = 0; k < int(labels.size()); ++k)
    if (labels[k].manifold == manifold && labels[k].parity == parity) return k;
  fail("invalid-state", "no state with manifold " + std::to_string(manifold) + " and parity " +
                            std::to_string(parity));
}

ManifoldSpectrum analyzeOscillator(const OscillatorParams& p, const FockSpace& space,
                                   bool acknowledgeNoStark) {
  const Mat h = buildKcqHamiltonian(p, space, acknowledgeNoStark);
  return diagonalizeAndClassify(h, space, metapotentialGeometry(p));
}

namespace {

Vec phaseFixed(const Vec& v) {
  int maxIdx = 0;
  v.cwiseAbs().maxCoeff(&maxIdx);
  const Complex amp = v(maxIdx);
  return v * (std::abs(amp) / amp) / v.norm();
}

}  // namespace

KcqBasis kcqBasisStates(const ManifoldSpectrum& spec) {
  if (spec.pairCount() < 1) fail("invalid-state", "manifold 0 is incomplete");
  const Vec even = phaseFixed(spec.state(0, +1));
  const Vec odd = phaseFixed(spec.state(0, -1));
  const double inv = 1.0 / std::sqrt(2.0);
  KcqBasis basis;
  basis.plusX = even;
  basis.minusX = odd;
  basis.plusZ = inv * (even + odd);
  basis.minusZ = inv * (even - odd);
  basis.plusY = inv * (even - Complex(0, 1) * odd);
  basis.minusY = inv * (even + Complex(0, 1) * odd);
  return basis;
}

double splittingIsoline(double target, double delta, const OscillatorParams& base,
                        const FockSpace& space, double eps2Lo, double eps2Hi,
                        int manifold, bool acknowledgeNoStark) {
  if (!(target > 0)) fail("invalid-params", "isoline target must be positive");
  if (!(eps2Hi > eps2Lo)) fail("invalid-params", "bad isoline bracket");
  auto splittingAt = [&](double eps2) {
    OscillatorParams p = base;
    p.delta = delta;
    p.eps2 = eps2;
    const auto spec = analyzeOscillator(p, space, acknowledgeNoStark);
    if (spec.pairCount() <= manifold) fail("invalid-state", "manifold missing in bracket scan");
    return spec.splittings(manifold);
  };

  // Monotonicity spot check over the bracket; the canonical branch falls
  // with eps2, but near the interference points the crossing can sit on the
  // rising branch, so either strict direction is accepted.
  constexpr int kProbe = 9;
  const double fLo = splittingAt(eps2Lo);
  const double fHi = splittingAt(eps2Hi);
  const double sign = fLo > fHi ? 1.0 : -1.0;  // +1: decreasing branch
  double prev = fLo;
  for (int k = 1; k < kProbe; ++k) {
    const double e = eps2Lo + (eps2Hi - eps2Lo) * k / (kProbe - 1);
    const double cur = splittingAt(e);
    if (sign * (cur - prev) > sign * sign * 1e-6 * prev + 1e-9 * target)
      fail("ambiguous-isoline", "splitting is not monotone over the bracket");
    prev = cur;
  }
  if (!((fLo - target) * (fHi - target) <= 0))
    fail("bracket-failure", "target splitting not bracketed");

  double lo = eps2Lo, hi = eps2Hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f = splittingAt(mid);
    if (std::abs(f - target) < 1e-3 * target) return mid;
    (sign * (f - target) > 0 ? lo : hi) = mid;
  }
  fail("bracket-failure", "isoline bisection did not converge");
}

std::string spectrumCsv(const ManifoldSpectrum& spec) {
  std::ostringstream os;
  os.precision(12);
  os << "index,manifold,parity,energy_over_h_Hz,mean_photon\n";
  for (int k = 0; k < int(spec.labels.size()); ++k)
    os << k << ',' << spec.labels[k].manifold << ',' << (spec.labels[k].parity > 0 ? '+' : '-')
       << ',' << angularToHz(spec.eigenvalues(k)) << ',' << spec.meanPhotons(k) << '\n';
  return os.str();
}

}  // namespace kerrcat::spectrum
