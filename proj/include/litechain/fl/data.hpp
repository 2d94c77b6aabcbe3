#pragma once

// Synthetic datasets and their distribution over devices.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "litechain/core/rng.hpp"
#include "litechain/core/types.hpp"

namespace litechain::fl {

struct BlobConfig {
  std::size_t dim = 16;
  std::uint32_t classes = 10;
  std::size_t samples = 6000;
  /// Class centres ~ N(0, center_scale^2 I); points ~ N(centre, spread^2 I).
  double center_scale = 1.0;
  double spread = 1.0;
};

/// Balanced Gaussian blobs (class of row i is i mod L), shuffled.
DatasetShard make_blobs(const BlobConfig& cfg, Rng& rng);

/// Rows [0, n - test) become the training split, the rest the test split.
std::pair<DatasetShard, DatasetShard> split_train_test(const DatasetShard& data, double test_fraction);

/// Rows selected by index.
DatasetShard subset(const DatasetShard& data, const std::vector<std::size_t>& rows);

/// Up to `n` rows drawn without replacement.
DatasetShard sample_rows(const DatasetShard& data, std::size_t n, Rng& rng);

/// Per-class Dirichlet(alpha) split over `devices` shards. Every shard gets at
/// least one sample; the union is exactly `data`.
std::vector<DatasetShard> partition_data(const DatasetShard& data, std::size_t devices, double alpha,
                                         std::uint32_t classes, Rng& rng);

/// CSV with one row per sample: label, then `dim` features.
DatasetShard read_csv(std::istream& in);

}  // namespace litechain::fl
