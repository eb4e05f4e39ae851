#include <cmath>

#include "cateselect/base_models.hpp"
#include "cateselect/rng.hpp"

namespace cateselect {

MlpNetwork::MlpNetwork(std::size_t inputs, std::vector<int> hidden) {
  sizes_.push_back(inputs);
  for (int h : hidden) sizes_.push_back(static_cast<std::size_t>(h));
  sizes_.push_back(1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) param_count_ += (sizes_[l] + 1) * sizes_[l + 1];
}

// Layout per layer: weights (out x in, column-major) then biases (out).
Vector MlpNetwork::initial_parameters(std::uint64_t seed) const {
  Vector p = Vector::Zero(static_cast<Eigen::Index>(param_count_));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double scale = std::sqrt(2.0 / static_cast<double>(sizes_[l]));
    const auto nw = static_cast<Eigen::Index>(sizes_[l] * sizes_[l + 1]);
    for (Eigen::Index k = 0; k < nw; ++k) p[off + k] = scale * normal(rng);
    off += nw + static_cast<Eigen::Index>(sizes_[l + 1]);
  }
  return p;
}

Vector MlpNetwork::forward(const Vector& params, const Matrix& x) const {
  Matrix a = x.transpose();  // features x batch
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    Eigen::Map<const Matrix> wmat(params.data() + off, out, in);
    Eigen::Map<const Vector> bias(params.data() + off + out * in, out);
    off += out * in + out;
    Matrix z = (wmat * a).colwise() + bias;
    if (l + 2 < sizes_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.row(0).transpose();
}

std::pair<double, Vector> MlpNetwork::loss_and_gradient(const Vector& params, const Matrix& x,
                                                        const Vector& y, const Vector& w,
                                                        bool logistic) const {
  const std::size_t layers = sizes_.size() - 1;
  std::vector<Matrix> acts;  // inputs to each layer
  acts.reserve(layers + 1);
  acts.push_back(x.transpose());
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    Eigen::Map<const Matrix> wmat(params.data() + off, out, in);
    Eigen::Map<const Vector> bias(params.data() + off + out * in, out);
    off += out * in + out;
    Matrix z = (wmat * acts.back()).colwise() + bias;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  const double wsum = w.sum();
  const Eigen::RowVectorXd out = acts.back().row(0);
  double loss = 0.0;
  Eigen::RowVectorXd delta(out.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double wi = w[i] / wsum;
    if (logistic) {
      const double z = out[i];
      const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      loss += wi * (sp - y[i] * z);
      const double pr = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      delta[i] = wi * (pr - y[i]);
    } else {
      const double r = out[i] - y[i];
      loss += wi * r * r;
      delta[i] = wi * 2.0 * r;
    }
  }

  Vector grad = Vector::Zero(params.size());
  Matrix back = delta;  // rows: outputs of current layer
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto outn = static_cast<Eigen::Index>(sizes_[l + 1]);
    Eigen::Map<Matrix> gw(grad.data() + offsets[l], outn, in);
    Eigen::Map<Vector> gb(grad.data() + offsets[l] + outn * in, outn);
    gw = back * acts[l].transpose();
    gb = back.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const Matrix> wmat(params.data() + offsets[l], outn, in);
      Matrix prev = wmat.transpose() * back;
      // ReLU derivative from the stored post-activation values.
      prev = prev.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
      back = std::move(prev);
    }
  }
  return {loss, grad};
}

}  // namespace cateselect
