#include "cgwp/gaussian.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "cgwp/errors.hpp"
#include "cgwp/moments.hpp"

namespace cgwp {

CMat symmetrized(const CMat& A) { return 0.5 * (A + A.transpose()); }

GaussianParams::GaussianParams(CMat A, RVec p, RVec q, cplx gamma)
    : A_(std::move(A)), p_(std::move(p)), q_(std::move(q)), gamma_(gamma) {
  const auto D = p_.size();
  if (D == 0 || q_.size() != D || A_.rows() != D || A_.cols() != D)
    throw InvalidParameters("inconsistent Gaussian parameter dimensions");
  if (!A_.allFinite() || !p_.allFinite() || !q_.allFinite() || !std::isfinite(gamma_.real()) ||
      !std::isfinite(gamma_.imag()))
    throw InvalidParameters("non-finite Gaussian parameter");
  const double asym = (A_ - A_.transpose()).norm();
  if (asym > kTolSym * std::max(1.0, A_.norm())) throw InvalidParameters("width matrix is not symmetric");
  const RMat im = 0.5 * (A_.imag() + A_.imag().transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(im, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InvalidParameters("Im A is not positive definite");
}

cplx GaussianParams::operator()(const RVec& x) const {
  const CVec d = (x - q_).cast<cplx>();
  const cplx quad = (d.transpose() * A_ * d)(0);
  return std::exp(kI * (quad + p_.dot(x - q_) + gamma_));
}

cplx evaluate(const GaussianParams& g, const RVec& x) { return g(x); }

WavePacket::WavePacket(std::vector<GaussianParams> gwps) : gwps_(std::move(gwps)) {
  if (gwps_.empty()) throw InvalidParameters("wave packet needs at least one GWP");
  dim_ = gwps_.front().dim();
  for (const auto& g : gwps_)
    if (g.dim() != dim_) throw InvalidParameters("GWPs of a wave packet must share their dimension");
}

cplx WavePacket::operator()(const RVec& x) const {
  cplx sum = 0.0;
  for (const auto& g : gwps_) sum += g(x);
  return sum;
}

double norm(const WavePacket& wp) {
  // Hermitian pair sum: diagonal terms plus twice the real part above it.
  MonomialTable table(wp.dim(), 0);
  double sum = 0.0;
  for (std::size_t l = 0; l < wp.size(); ++l) {
    sum += PairMoments(wp[l], wp[l], table)[0].real();
    for (std::size_t k = l + 1; k < wp.size(); ++k) sum += 2.0 * PairMoments(wp[l], wp[k], table)[0].real();
  }
  if (!(sum >= 0.0)) throw InvalidParameters("squared norm is negative");
  return std::sqrt(sum);
}

WidthFactors WidthFactors::from_width(const CMat& A) {
  return {2.0 * A, CMat::Identity(A.rows(), A.cols())};
}

CMat WidthFactors::width(double cond_max) const {
  Eigen::PartialPivLU<CMat> lu(C);
  if (!(lu.rcond() * cond_max > 1.0)) throw InvalidParameters("width factor C is numerically singular");
  return 0.5 * B * lu.inverse();
}

}  // namespace cgwp
