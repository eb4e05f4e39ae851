#include "cateselect/kl_radius.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cateselect::kl {

void RadiusPolicy::validate() const {
  if (k < 1) throw ValidationError("KL neighbor count k must be >= 1");
  if (!(offset >= 0.0) || !std::isfinite(offset)) throw ValidationError("radius offset must be >= 0");
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// k-th smallest squared distance from row `i` of `query` to rows of `ref`,
// skipping ref row `skip` (pass ref.rows() to skip nothing).
double kth_sq_distance(const RowMatrix& ref, const RowMatrix& query, Eigen::Index i, std::size_t k,
                       Eigen::Index skip, std::vector<double>& heap) {
  heap.clear();
  const Eigen::Index d = ref.cols();
  for (Eigen::Index r = 0; r < ref.rows(); ++r) {
    if (r == skip) continue;
    double dist = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double diff = ref(r, c) - query(i, c);
      dist += diff * diff;
    }
    if (heap.size() < k) {
      heap.push_back(dist);
      std::push_heap(heap.begin(), heap.end());
    } else if (dist < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = dist;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  return heap.front();
}

}  // namespace

double knn_kl_divergence(const Matrix& p, const Matrix& q, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (p.cols() != q.cols()) throw ValidationError("sample dimensions differ");
  if (p.cols() < 1) throw ValidationError("samples need at least one dimension");
  const auto n = static_cast<std::size_t>(p.rows());
  const auto m = static_cast<std::size_t>(q.rows());
  const auto kk = static_cast<std::size_t>(k);
  if (n <= kk) throw ValidationError("n must exceed k (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  if (m < kk) throw ValidationError("m must be at least k (m = " + std::to_string(m) + ", k = " + std::to_string(k) + ")");

  const RowMatrix pt = p, qt = q;
  std::vector<double> heap, terms(n);
  heap.reserve(kk);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double rho = std::max(std::sqrt(kth_sq_distance(pt, pt, ii, kk, ii, heap)), kDistanceJitter);
    const double nu = std::max(std::sqrt(kth_sq_distance(qt, pt, ii, kk, qt.rows(), heap)), kDistanceJitter);
    terms[i] = std::log(nu / rho);
  }
  // Summing in sorted order makes the estimate independent of row order.
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  const double d = static_cast<double>(p.cols());
  return d / static_cast<double>(n) * sum +
         std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

Radii compute_radii(const ObservationalDataset& data, const RadiusPolicy& policy) {
  policy.validate();
  const auto treated = data.treated_indices();
  const auto control = data.control_indices();
  const auto need = static_cast<std::size_t>(policy.k);
  if (treated.size() <= need || control.size() <= need)
    throw ValidationError("each arm needs more than k = " + std::to_string(policy.k) +
                          " units to estimate the KL radius");
  const Matrix x = policy.standardize ? standardize_columns(data.covariates()).values : data.covariates();
  const Matrix xt = select_rows(x, treated);
  const Matrix xc = select_rows(x, control);

  Radii r;
  r.kl_treated_control = knn_kl_divergence(xt, xc, policy.k);
  r.kl_control_treated = knn_kl_divergence(xc, xt, policy.k);
  // Without clamping the radius itself still cannot go negative.
  auto radius = [&](double v) {
    return policy.clamp_nonnegative ? std::max(v, 0.0) + policy.offset : std::max(v + policy.offset, 0.0);
  };
  r.eps0 = radius(r.kl_treated_control);
  r.eps1 = radius(r.kl_control_treated);
  return r;
}

}  // namespace cateselect::kl
