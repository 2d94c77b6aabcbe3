#include "litechain/fl/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "litechain/core/rng.hpp"

namespace litechain::fl {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMat = Eigen::Map<const RowMat>;
using Mat = Eigen::Map<RowMat>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

// Numerically stable softmax in place; returns log-sum-exp.
double softmax(Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  z = (z.array() - m).exp();
  const double s = z.sum();
  z /= s;
  return m + std::log(s);
}

struct Views {
  // The linear model only uses w1 and b1.
  CMat w1;
  CVec b1;
  CMat w2;
  CVec b2;
};

Views views(const ModelSpec& s, std::span<const double> w) {
  const auto d = static_cast<Eigen::Index>(s.input_dim);
  const auto l = static_cast<Eigen::Index>(s.classes);
  const double* p = w.data();
  if (s.kind == ModelKind::softmax_linear) {
    return {CMat(p, l, d), CVec(p + l * d, l), CMat(nullptr, 0, 0), CVec(nullptr, 0)};
  }
  const auto h = static_cast<Eigen::Index>(s.hidden);
  return {CMat(p, h, d), CVec(p + h * d, h), CMat(p + h * d + h, l, h), CVec(p + h * d + h + l * h, l)};
}

Eigen::VectorXd logits(const ModelSpec& s, const Views& v, const double* x, Eigen::VectorXd* hidden) {
  const CVec xv(x, static_cast<Eigen::Index>(s.input_dim));
  if (s.kind == ModelKind::softmax_linear) return v.w1 * xv + v.b1;
  Eigen::VectorXd a = (v.w1 * xv + v.b1).array().tanh();
  Eigen::VectorXd z = v.w2 * a + v.b2;
  if (hidden) *hidden = std::move(a);
  return z;
}

}  // namespace

std::size_t ModelSpec::num_params() const {
  if (kind == ModelKind::softmax_linear) return classes * input_dim + classes;
  return hidden * input_dim + hidden + classes * hidden + classes;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw Error("model input_dim must be >= 1");
  if (classes < 2) throw Error("model needs at least 2 classes");
  if (kind == ModelKind::mlp && hidden == 0) throw Error("mlp hidden width must be >= 1");
}

std::vector<double> init_weights(const ModelSpec& spec) {
  spec.validate();
  std::vector<double> w(spec.num_params(), 0.0);
  Rng rng(spec.init_seed);
  if (spec.kind == ModelKind::softmax_linear) {
    for (std::size_t i = 0; i < spec.classes * spec.input_dim; ++i) w[i] = rng.normal(0.0, 0.01);
    return w;
  }
  const std::size_t h = spec.hidden, d = spec.input_dim, l = spec.classes;
  const double s1 = std::sqrt(2.0 / static_cast<double>(h + d));
  const double s2 = std::sqrt(2.0 / static_cast<double>(l + h));
  for (std::size_t i = 0; i < h * d; ++i) w[i] = rng.normal(0.0, s1);
  for (std::size_t i = 0; i < l * h; ++i) w[h * d + h + i] = rng.normal(0.0, s2);
  return w;
}

double loss_and_grad(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data,
                     std::span<const std::size_t> rows, std::span<double> grad) {
  if (w.size() != spec.num_params()) throw Error("weight vector does not match the model spec");
  if (data.dim != spec.input_dim) throw Error("dataset dimension does not match the model spec");
  if (rows.empty()) throw Error("empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != w.size()) throw Error("gradient buffer has the wrong size");
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const auto v = views(spec, w);
  const auto d = static_cast<Eigen::Index>(spec.input_dim);
  const auto l = static_cast<Eigen::Index>(spec.classes);
  const auto h = static_cast<Eigen::Index>(spec.hidden);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  Eigen::VectorXd a;
  for (const auto r : rows) {
    const double* x = data.row(r);
    const auto y = static_cast<Eigen::Index>(data.labels[r]);
    if (y >= l) throw Error("label " + std::to_string(y) + " out of range");
    const CVec xv(x, d);
    Eigen::VectorXd z = logits(spec, v, x, &a);
    const double zy = z(y);
    const double lse = softmax(z);  // z now holds probabilities
    total += lse - zy;
    if (!want_grad) continue;
    z(y) -= 1.0;  // dL/dlogits
    z *= inv_n;
    if (spec.kind == ModelKind::softmax_linear) {
      Mat gw(grad.data(), l, d);
      Vec gb(grad.data() + l * d, l);
      gw.noalias() += z * xv.transpose();
      gb += z;
    } else {
      Mat gw1(grad.data(), h, d);
      Vec gb1(grad.data() + h * d, h);
      Mat gw2(grad.data() + h * d + h, l, h);
      Vec gb2(grad.data() + h * d + h + l * h, l);
      gw2.noalias() += z * a.transpose();
      gb2 += z;
      const Eigen::VectorXd da = (v.w2.transpose() * z).array() * (1.0 - a.array().square());
      gw1.noalias() += da * xv.transpose();
      gb1 += da;
    }
  }
  return total * inv_n;
}

double loss(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return loss_and_grad(spec, w, data, rows, {});
}

std::uint32_t predict(const ModelSpec& spec, std::span<const double> w, const double* x) {
  const auto v = views(spec, w);
  const Eigen::VectorXd z = logits(spec, v, x, nullptr);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    if (z(i) > z(best)) best = i;
  }
  return static_cast<std::uint32_t>(best);
}

double accuracy(const ModelSpec& spec, std::span<const double> w, const DatasetShard& data) {
  if (data.size() == 0) throw Error("accuracy on an empty dataset");
  if (w.size() != spec.num_params()) throw Error("weight vector does not match the model spec");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += predict(spec, w, data.row(i)) == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace litechain::fl
