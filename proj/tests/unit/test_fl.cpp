#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "litechain/core/serialize.hpp"
#include "litechain/fl/data.hpp"
#include "litechain/fl/model.hpp"
#include "litechain/fl/train.hpp"

using namespace litechain;
using namespace litechain::fl;

namespace {

DatasetShard random_shard(Rng& rng, std::size_t n, std::size_t dim, std::uint32_t classes) {
  DatasetShard s;
  s.dim = dim;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = rng.normal();
    s.push_back(x.data(), static_cast<std::uint32_t>(rng.below(classes)));
  }
  return s;
}

std::vector<double> random_weights(Rng& rng, std::size_t n, double scale) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal(0.0, scale);
  return w;
}

// Independent gradient of the softmax-linear cross-entropy for one sample,
// written with plain loops.
std::vector<double> linear_gradient(std::size_t d, std::size_t l, const std::vector<double>& w, const double* x,
                                    std::uint32_t y) {
  std::vector<double> z(l);
  for (std::size_t c = 0; c < l; ++c) {
    z[c] = w[l * d + c];
    for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * x[j];
  }
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (auto& v : z) sum += (v = std::exp(v - m));
  std::vector<double> g(w.size());
  for (std::size_t c = 0; c < l; ++c) {
    const double delta = z[c] / sum - (c == y ? 1.0 : 0.0);
    for (std::size_t j = 0; j < d; ++j) g[c * d + j] = delta * x[j];
    g[l * d + c] = delta;
  }
  return g;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  Rng rng(314);
  for (int trial = 0; trial < 50; ++trial) {
    ModelSpec spec;
    spec.kind = trial % 2 ? ModelKind::mlp : ModelKind::softmax_linear;
    spec.input_dim = 2 + rng.below(5);
    spec.classes = 2 + static_cast<std::uint32_t>(rng.below(5));
    spec.hidden = 2 + rng.below(4);
    const auto data = random_shard(rng, 3 + rng.below(6), spec.input_dim, static_cast<std::uint32_t>(spec.classes));
    auto w = random_weights(rng, spec.num_params(), 0.5);
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<double> grad(w.size());
    loss_and_grad(spec, w, data, rows, grad);

    const double h = 1e-6;
    double diff2 = 0, norm_a = 0, norm_n = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = loss_and_grad(spec, w, data, rows, {});
      w[i] = keep - h;
      const double down = loss_and_grad(spec, w, data, rows, {});
      w[i] = keep;
      const double num = (up - down) / (2 * h);
      diff2 += (num - grad[i]) * (num - grad[i]);
      norm_a += grad[i] * grad[i];
      norm_n += num * num;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
    CAPTURE(trial);
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("one SGD step on one sample matches an independent gradient") {
  Rng rng(2);
  ModelSpec spec{ModelKind::softmax_linear, 4, 3, 0, 9};
  DatasetShard one;
  one.dim = 4;
  const double x[4] = {0.5, -1.0, 2.0, 0.25};
  one.push_back(x, 2);
  const auto w0 = random_weights(rng, spec.num_params(), 0.3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.steps = 1;
  cfg.batch = 128;
  const auto u = local_train(spec, w0, one, cfg, 7, 3, rng);
  const auto g = linear_gradient(4, 3, w0, x, 2);
  for (std::size_t i = 0; i < w0.size(); ++i) CHECK(u.weights[i] == doctest::Approx(w0[i] - 0.05 * g[i]).epsilon(1e-10));
  CHECK(u.owner == 7);
  CHECK(u.round == 3);
  CHECK(u.local_steps == 1);
}

TEST_CASE("zero learning rate keeps the weights and identifier") {
  Rng rng(3);
  ModelSpec spec{ModelKind::softmax_linear, 5, 4, 0, 1};
  const auto w0 = init_weights(spec);
  const auto shard = random_shard(rng, 40, 5, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.steps = 5;
  const auto u = local_train(spec, w0, shard, cfg, 0, 1, rng);
  CHECK(u.weights == w0);
  CHECK(u.identifier == canonical_hash(w0));
}

TEST_CASE("training lowers the loss on a separable problem") {
  Rng rng(4);
  BlobConfig bc;
  bc.dim = 2;
  bc.classes = 2;
  bc.samples = 200;
  bc.center_scale = 3.0;
  bc.spread = 0.3;
  const auto data = make_blobs(bc, rng);
  ModelSpec spec{ModelKind::softmax_linear, 2, 2, 0, 5};
  const auto w0 = init_weights(spec);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.steps = 50;
  cfg.batch = 32;
  const auto u = local_train(spec, w0, data, cfg, 0, 1, rng);
  CHECK(loss(spec, u.weights, data) <= loss(spec, w0, data));

  TrainConfig wild = cfg;
  wild.learning_rate = 1e308;
  CHECK_THROWS_WITH_AS(local_train(spec, w0, data, wild, 0, 1, rng), doctest::Contains("divergence"), Error);
}

TEST_CASE("local step count derives from epochs") {
  TrainConfig cfg;
  cfg.batch = 128;
  cfg.epochs = 2;
  CHECK(local_steps(cfg, 300) == 6);
  CHECK(local_steps(cfg, 1) == 2);
  cfg.steps = 4;
  CHECK(local_steps(cfg, 300) == 4);
}

TEST_CASE("off-chain verification") {
  ModelSpec spec{ModelKind::softmax_linear, 3, 10, 0, 0};
  // Constant prediction: only the bias of class 4 is positive.
  ModelUpdate constant;
  constant.weights.assign(spec.num_params(), 0.0);
  constant.weights[30 + 4] = 1.0;
  constant.seal();
  DatasetShard balanced;
  balanced.dim = 3;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double x[3] = {rng.normal(), rng.normal(), rng.normal()};
    balanced.push_back(x, static_cast<std::uint32_t>(i % 10));
  }
  const auto v = offchain_verify(constant, spec, balanced, 0.1);
  CHECK(v.accuracy == doctest::Approx(0.1));
  CHECK(v.accepted);

  auto forged = constant;
  forged.signature_valid = false;
  const auto f = offchain_verify(forged, spec, balanced, 0.0);
  CHECK_FALSE(f.accepted);
  CHECK(f.reason == "signature");

  // A model that maps every class to its successor is always wrong.
  BlobConfig bc;
  bc.dim = 3;
  bc.samples = 500;
  bc.center_scale = 5.0;
  bc.spread = 0.2;
  auto data = make_blobs(bc, rng);
  auto flipped = data;
  for (auto& l : flipped.labels) l = (l + 1) % 10;
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.steps = 300;
  cfg.batch = 64;
  const auto poisoned = local_train(spec, init_weights(spec), flipped, cfg, 0, 1, rng);
  const auto q = offchain_verify(poisoned, spec, sample_rows(data, 64, rng), 0.1);
  CHECK_FALSE(q.accepted);
  CHECK(q.reason == "quality");
}

TEST_CASE("fedavg") {
  const std::vector<std::vector<double>> one = {{1.0, 2.0}};
  const std::vector<double> s1 = {5.0};
  CHECK(fedavg(one, s1) == one[0]);
  const std::vector<std::vector<double>> two = {{0.0}, {4.0}};
  const std::vector<double> s2 = {1.0, 3.0};
  CHECK(fedavg(two, s2)[0] == doctest::Approx(3.0).epsilon(1e-15));
  const std::vector<double> eq = {2.0, 2.0};
  CHECK(fedavg(two, eq)[0] == doctest::Approx(2.0));
  CHECK_THROWS_WITH(fedavg(std::vector<std::vector<double>>{}, std::vector<double>{}), "empty aggregation");

  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = 1 + rng.below(6);
    std::vector<std::vector<double>> ws;
    std::vector<double> sizes;
    for (std::size_t i = 0; i < m; ++i) {
      ws.push_back(random_weights(rng, 8, 1.0));
      sizes.push_back(1 + static_cast<double>(rng.below(100)));
    }
    const auto avg = fedavg(ws, sizes);
    for (std::size_t j = 0; j < 8; ++j) {
      double lo = ws[0][j], hi = ws[0][j];
      for (const auto& w : ws) lo = std::min(lo, w[j]), hi = std::max(hi, w[j]);
      CHECK(avg[j] >= lo - 1e-12);
      CHECK(avg[j] <= hi + 1e-12);
    }
  }
}

TEST_CASE("staleness weights") {
  const double s = 0.25;
  CHECK(staleness_weight(s, 5, 5) == s);
  CHECK(staleness_weight(s, 8, 5) == s / 2);
  for (std::uint64_t d = 0; d < 50; ++d) CHECK(staleness_weight(s, 100, 100 - d - 1) < staleness_weight(s, 100, 100 - d));
  CHECK_THROWS_AS(staleness_weight(s, 1, 2), Error);
}

TEST_CASE("staleness aggregate matches a hand-unrolled scalar recursion") {
  const double s = 0.5;
  StalenessAggregator agg({0, 1}, {1.0}, s);
  CHECK(agg.global()[0] == 1.0);
  // t = 1: cluster 0 fresh with 3.0.
  double sum = s * 1.0 + s * 1.0;
  sum = sum - s * 1.0 + s * 3.0;
  CHECK(agg.contribute(0, 1, {3.0}, 1)[0] == doctest::Approx(sum).epsilon(1e-12));
  // t = 2: cluster 1 delivers a model trained from version 0 (staleness 2).
  const double w1 = s / std::sqrt(3.0);
  sum = sum - s * 1.0 + w1 * 5.0;
  CHECK(agg.contribute(1, 0, {5.0}, 2)[0] == doctest::Approx(sum).epsilon(1e-12));
  // t = 3: cluster 0 delivers a model from version 2, replacing its t = 1 term.
  const double w0 = s / std::sqrt(2.0);
  sum = sum - s * 3.0 + w0 * -2.0;
  CHECK(agg.contribute(0, 2, {-2.0}, 3)[0] == doctest::Approx(sum).epsilon(1e-12));
  CHECK(std::abs(agg.global()[0] - (w0 * -2.0 + w1 * 5.0)) <= 1e-12);
  CHECK(agg.term(1).weight == doctest::Approx(w1).epsilon(1e-15));
}

TEST_CASE("fresh equal contributions reduce to the uniform mean") {
  StalenessAggregator agg({3, 5, 9}, {0.0, 0.0}, 1.0 / 3.0);
  agg.contribute(3, 4, {3.0, 0.0}, 4);
  agg.contribute(5, 4, {6.0, 3.0}, 4);
  agg.contribute(9, 4, {0.0, 6.0}, 4);
  CHECK(agg.global()[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(agg.global()[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("dirichlet partition") {
  Rng rng(8);
  BlobConfig bc;
  bc.samples = 5000;
  const auto data = make_blobs(bc, rng);

  auto iid = partition_data(data, 10, 1e6, 10, rng);
  std::size_t total = 0;
  for (const auto& s : iid) {
    total += s.size();
    std::vector<double> hist(10);
    for (auto l : s.labels) hist[l] += 1.0 / s.size();
    for (double h : hist) CHECK(std::abs(h - 0.1) < 0.02);
  }
  CHECK(total == data.size());

  auto skewed = partition_data(data, 10, 0.2, 10, rng);
  bool dominated = false;
  total = 0;
  for (const auto& s : skewed) {
    REQUIRE(s.size() >= 1);
    total += s.size();
    std::vector<std::size_t> hist(10);
    for (auto l : s.labels) ++hist[l];
    dominated |= *std::max_element(hist.begin(), hist.end()) * 2 > s.size();
  }
  CHECK(dominated);
  CHECK(total == data.size());

  // Every row lands exactly once.
  auto tiny = data;
  tiny.features.resize(25 * tiny.dim);
  tiny.labels.resize(25);
  const auto shards = partition_data(tiny, 20, 0.05, 10, rng);
  std::size_t n = 0;
  for (const auto& s : shards) {
    CHECK(s.size() >= 1);
    n += s.size();
  }
  CHECK(n == 25);
  CHECK_THROWS_AS(partition_data(tiny, 30, 1.0, 10, rng), Error);
  CHECK_THROWS_AS(partition_data(tiny, 3, 0.0, 10, rng), Error);
}

TEST_CASE("blobs are balanced and reproducible") {
  Rng a(1), b(1);
  BlobConfig bc;
  bc.samples = 1000;
  const auto x = make_blobs(bc, a);
  const auto y = make_blobs(bc, b);
  CHECK(x == y);
  std::vector<int> hist(10);
  for (auto l : x.labels) ++hist[l];
  for (int h : hist) CHECK(h == 100);
  const auto [train, test] = split_train_test(x, 0.2);
  CHECK(train.size() == 800);
  CHECK(test.size() == 200);
}

TEST_CASE("csv import") {
  std::stringstream ok("1,0.5,2\n0,-1,3e2\n");
  const auto s = read_csv(ok);
  CHECK(s.size() == 2);
  CHECK(s.dim == 2);
  CHECK(s.labels[0] == 1);
  CHECK(s.row(1)[1] == 300.0);
  std::stringstream bad("1,0.5\n0,x\n");
  CHECK_THROWS_WITH_AS(read_csv(bad), doctest::Contains("line 2"), Error);
}
