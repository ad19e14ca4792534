#include "kerrcat/hilbert.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>

namespace kerrcat {

int logLevel() {
  static int level = [] {
    const char* env = std::getenv("KERRCAT_LOG");
    if (!env) return 0;
    std::string s(env);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
  }();
  return level;
}

void logInfo(const std::string& msg) {
  if (logLevel() >= 1) std::cerr << "[kerrcat] " << msg << "\n";
}

void logDebug(const std::string& msg) {
  if (logLevel() >= 2) std::cerr << "[kerrcat:debug] " << msg << "\n";
}

}  // namespace kerrcat

namespace kerrcat::hilbert {

FockOperators buildFockOperators(const FockSpace& space) {
  if (space.dim < 2) fail("invalid-dimension", "Fock dimension must be >= 2, got " + std::to_string(space.dim));
  const int d = space.dim;
  FockOperators ops;
  ops.annihilation = Mat::Zero(d, d);
  ops.number = Mat::Zero(d, d);
  ops.parity = Mat::Zero(d, d);
  for (int n = 0; n < d; ++n) {
    ops.number(n, n) = double(n);
    ops.parity(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    if (n + 1 < d) ops.annihilation(n, n + 1) = std::sqrt(double(n + 1));
  }
  return ops;
}

Mat displacementOperator(const FockSpace& space, PhaseSpacePoint beta) {
  const auto ops = buildFockOperators(space);
  if (std::norm(beta) > 0.25 * space.dim)
    logInfo("displacementOperator: |beta|^2 = " + std::to_string(std::norm(beta)) +
            " exceeds dim/4; truncation artifacts likely");
  // beta a^dag - conj(beta) a = i H with H Hermitian; D = exp(i H).
  const Mat gen = beta * ops.annihilation.adjoint() - std::conj(beta) * ops.annihilation;
  const Mat h = Complex(0, -1) * gen;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Vec phases = (Complex(0, 1) * es.eigenvalues().cast<Complex>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

// Head of D(beta) psi in a workspace of outDim Fock states, through the
// normally ordered factorization D = exp(-|b|^2/2) exp(b a^dag) exp(-b* a).
// Both series terminate (a lowers, and components above outDim never feed
// back), so the retained amplitudes are exact up to rounding.
Vec displaceVector(const Vec& psi, PhaseSpacePoint beta, int outDim) {
  Vec u = Vec::Zero(outDim);
  u.head(psi.size()) = psi;
  if (beta == PhaseSpacePoint(0, 0)) return u;

  Vec term = u;
  for (int k = 1; k < outDim && term.cwiseAbs().maxCoeff() > 0; ++k) {
    Vec lowered = Vec::Zero(outDim);
    for (int n = 1; n < outDim; ++n) lowered(n - 1) = std::sqrt(double(n)) * term(n);
    term = (-std::conj(beta) / double(k)) * lowered;
    u += term;
  }
  Vec w = u;
  term = u;
  for (int k = 1; k < outDim; ++k) {
    Vec raised = Vec::Zero(outDim);
    for (int n = 0; n + 1 < outDim; ++n) raised(n + 1) = std::sqrt(double(n + 1)) * term(n);
    term = (beta / double(k)) * raised;
    w += term;
  }
  return std::exp(-0.5 * std::norm(beta)) * w;
}

}  // namespace

std::vector<double> wignerFunction(const Mat& rho, const std::vector<PhaseSpacePoint>& grid) {
  if (rho.rows() != rho.cols()) fail("invalid-state", "density matrix must be square");
  if (std::abs(rho.trace().real() - 1.0) > 1e-6 || std::abs(rho.trace().imag()) > 1e-9)
    fail("invalid-state", "density matrix trace differs from 1");
  if (!isHermitian(rho, 1e-9)) fail("invalid-state", "density matrix is not Hermitian");

  // Spectral form: Tr[D rho D^dag P] = sum_k p_k (D v_k)^dag P (D v_k), with
  // the workspace enlarged so displaced states keep their photon tails.
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho + Mat(rho.adjoint())));
  double maxBeta = 0.0;
  for (const auto& b : grid) maxBeta = std::max(maxBeta, std::abs(b));
  double support = 0.0;
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    if (es.eigenvalues()(k) < 1e-12) continue;
    for (int n = 0; n < rho.rows(); ++n)
      if (std::abs(es.eigenvectors()(n, k)) > 1e-10) support = std::max(support, double(n));
  }
  const double displacedMean = (std::sqrt(support) + maxBeta) * (std::sqrt(support) + maxBeta);
  const int workDim = std::max<int>(int(rho.rows()),
                                    int(std::ceil(displacedMean + 6.0 * std::sqrt(displacedMean) + 8)));

  std::vector<double> values(grid.size(), 0.0);
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    const double pk = es.eigenvalues()(k);
    if (pk < 1e-12) continue;
    const Vec vk = es.eigenvectors().col(k);
    for (size_t g = 0; g < grid.size(); ++g) {
      const Vec w = displaceVector(vk, grid[g], workDim);
      double paritySum = 0.0;
      for (int n = 0; n < workDim; ++n)
        paritySum += (n % 2 == 0 ? 1.0 : -1.0) * std::norm(w(n));
      values[g] += (2.0 / M_PI) * pk * paritySum;
    }
  }
  return values;
}

Mat tensorEmbed(const Mat& opA, const Mat& opB) {
  if (opA.rows() != opA.cols() || opB.rows() != opB.cols())
    fail("invalid-shape", "tensorEmbed requires square operators");
  const int ra = int(opA.rows()), rb = int(opB.rows());
  Mat out(ra * rb, ra * rb);
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < ra; ++j) out.block(i * rb, j * rb, rb, rb) = opA(i, j) * opB;
  return out;
}

}  // namespace kerrcat::hilbert
