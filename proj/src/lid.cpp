#include "energy_matching/lid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "energy_matching/error.hpp"
#include "energy_matching/parallel.hpp"

namespace energy_matching {

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a_in, int max_sweeps) {
  if (a_in.rows() != a_in.cols()) throw DimensionError("symmetric_eigenvalues: matrix is not square");
  const Eigen::Index n = a_in.rows();
  Eigen::MatrixXd a = a_in.triangularView<Eigen::Upper>();
  a.triangularView<Eigen::StrictlyLower>() = a.transpose().triangularView<Eigen::StrictlyLower>();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == 0.0 || std::sqrt(off) <= 1e-15 * a.norm()) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle zeroing a(p, q), computed in the stable form.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }
  Eigen::VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

SpectrumReport hessian_spectrum(const PotentialNet& net, const Point& x, double grad_warn_bound) {
  SpectrumReport r;
  r.point = x;
  r.grad_norm = net.grad_x(x).norm();
  r.gradient_warning = r.grad_norm > grad_warn_bound;
  Eigen::VectorXd ev = symmetric_eigenvalues(net.hessian_x(x));
  std::stable_sort(ev.data(), ev.data() + ev.size(),
                   [](double a, double b) { return std::abs(a) < std::abs(b); });
  r.eigenvalues = std::move(ev);
  return r;
}

int estimate_lid(const SpectrumReport& spectrum, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("tau: must be nonnegative");
  int count = 0;
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i)
    if (std::abs(spectrum.eigenvalues(i)) <= tau) ++count;
  return count;
}

double gap_threshold(const Eigen::VectorXd& eigenvalues) {
  const Eigen::Index n = eigenvalues.size();
  if (n == 0) return 0.0;
  std::vector<double> mags(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mags[static_cast<size_t>(i)] = std::abs(eigenvalues(i));
  std::sort(mags.begin(), mags.end());
  if (n == 1) return mags[0];
  // Floor keeps ratios finite when the flat directions are exactly zero.
  const double floor = std::max(mags.back() * 1e-12, 1e-300);
  size_t best = 0;
  double best_ratio = -1.0;
  for (size_t i = 0; i + 1 < mags.size(); ++i) {
    const double ratio = (mags[i + 1] + floor) / (mags[i] + floor);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  return std::sqrt((mags[best] + floor) * (mags[best + 1] + floor));
}

double default_tau(const std::vector<SpectrumReport>& spectra) {
  if (spectra.empty()) throw ContractError("default_tau: no spectra");
  std::vector<double> taus;
  taus.reserve(spectra.size());
  for (const auto& s : spectra) taus.push_back(gap_threshold(s.eigenvalues));
  std::sort(taus.begin(), taus.end());
  const size_t m = taus.size() / 2;
  return taus.size() % 2 == 1 ? taus[m] : 0.5 * (taus[m - 1] + taus[m]);
}

std::vector<SpectrumReport> estimate_lid_batch(const PotentialNet& net, const SampleBatch& points, double tau,
                                               double grad_warn_bound, int threads) {
  if (points.rows() != net.input_dim()) throw DimensionError("estimate_lid_batch: dimension mismatch");
  std::vector<SpectrumReport> out(static_cast<size_t>(points.cols()));
  for_each_chunk(points.cols(), resolve_threads(threads), [&](long begin, long end) {
    for (long j = begin; j < end; ++j)
      out[static_cast<size_t>(j)] = hessian_spectrum(net, points.col(j), grad_warn_bound);
  });
  if (out.empty()) return out;
  const double t = tau >= 0.0 ? tau : default_tau(out);
  for (auto& s : out) {
    s.tau = t;
    s.lid = estimate_lid(s, t);
  }
  return out;
}

}  // namespace energy_matching
