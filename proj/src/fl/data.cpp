#include "litechain/fl/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>

namespace litechain::fl {

DatasetShard make_blobs(const BlobConfig& cfg, Rng& rng) {
  if (cfg.dim == 0 || cfg.classes < 2 || cfg.samples == 0) throw Error("blob config needs dim, classes and samples");
  std::vector<double> centres(cfg.classes * cfg.dim);
  for (auto& c : centres) c = rng.normal(0.0, cfg.center_scale);
  std::vector<std::size_t> order(cfg.samples);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  DatasetShard out;
  out.dim = cfg.dim;
  std::vector<double> x(cfg.dim);
  for (std::size_t i : order) {
    const auto label = static_cast<std::uint32_t>(i % cfg.classes);
    for (std::size_t j = 0; j < cfg.dim; ++j) x[j] = rng.normal(centres[label * cfg.dim + j], cfg.spread);
    out.push_back(x.data(), label);
  }
  return out;
}

DatasetShard subset(const DatasetShard& data, const std::vector<std::size_t>& rows) {
  DatasetShard out;
  out.dim = data.dim;
  out.features.reserve(rows.size() * data.dim);
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    if (r >= data.size()) throw Error("row index out of range");
    out.push_back(data.row(r), data.labels[r]);
  }
  return out;
}

std::pair<DatasetShard, DatasetShard> split_train_test(const DatasetShard& data, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test fraction must be in (0, 1)");
  const auto n = data.size();
  const auto test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (test == 0 || test >= n) throw Error("dataset too small for a train/test split");
  std::vector<std::size_t> a(n - test), b(test);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), n - test);
  return {subset(data, a), subset(data, b)};
}

DatasetShard sample_rows(const DatasetShard& data, std::size_t n, Rng& rng) {
  const auto k = std::min(n, data.size());
  auto rows = rng.sample_without_replacement(data.size(), k);
  std::sort(rows.begin(), rows.end());
  return subset(data, rows);
}

std::vector<DatasetShard> partition_data(const DatasetShard& data, std::size_t devices, double alpha,
                                         std::uint32_t classes, Rng& rng) {
  if (!(alpha > 0.0)) throw Error("dirichlet alpha must be > 0");
  if (devices == 0) throw Error("partition_data needs at least one device");
  if (data.size() < devices) {
    throw Error("dataset of " + std::to_string(data.size()) + " samples is smaller than " +
                std::to_string(devices) + " devices");
  }
  data.validate(classes);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> rows(devices);
  for (std::uint32_t c = 0; c < classes; ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    rng.shuffle(std::span<std::size_t>(pool));
    const auto p = rng.dirichlet(alpha, devices);
    // Largest-remainder rounding of pool.size() * p.
    std::vector<std::size_t> count(devices);
    std::vector<std::pair<double, std::size_t>> rem(devices);
    std::size_t assigned = 0;
    for (std::size_t d = 0; d < devices; ++d) {
      const double exact = p[d] * static_cast<double>(pool.size());
      count[d] = static_cast<std::size_t>(std::floor(exact));
      assigned += count[d];
      rem[d] = {exact - std::floor(exact), d};
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; assigned < pool.size(); ++i, ++assigned) ++count[rem[i % devices].second];
    std::size_t cursor = 0;
    for (std::size_t d = 0; d < devices; ++d) {
      for (std::size_t j = 0; j < count[d]; ++j) rows[d].push_back(pool[cursor++]);
    }
  }
  // Guard: an empty device takes one row from the currently largest shard.
  for (std::size_t d = 0; d < devices; ++d) {
    if (!rows[d].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t e = 1; e < devices; ++e) {
      if (rows[e].size() > rows[donor].size()) donor = e;
    }
    rows[d].push_back(rows[donor].back());
    rows[donor].pop_back();
  }
  std::vector<DatasetShard> out;
  out.reserve(devices);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    out.push_back(subset(data, r));
  }
  return out;
}

DatasetShard read_csv(std::istream& in) {
  DatasetShard out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> x;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    x.clear();
    long label = -1;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        if (first) {
          label = std::stol(cell, &used);
        } else {
          x.push_back(std::stod(cell, &used));
        }
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error("csv line " + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      first = false;
    }
    if (label < 0) throw Error("csv line " + std::to_string(lineno) + ": negative or missing label");
    if (out.dim == 0) out.dim = x.size();
    if (x.size() != out.dim || x.empty()) {
      throw Error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(out.dim) + " features");
    }
    out.push_back(x.data(), static_cast<std::uint32_t>(label));
  }
  if (out.size() == 0) throw Error("csv has no rows");
  return out;
}

}  // namespace litechain::fl
