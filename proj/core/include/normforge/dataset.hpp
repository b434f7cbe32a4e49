#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "normforge/model.hpp"

namespace normforge {

enum class DatasetKind { TeacherNet, GaussianBlobs, CharCopy };

/// Deterministic synthetic data: the same spec (plus dims and batch size)
/// always produces identical bytes.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::TeacherNet;
  long size = 256;
  double noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generates `size` examples and splits them into batches of batch_size
/// (last batch may be short). Dims and batch size come from the model and
/// run configuration; the spec itself stays minimal.
std::vector<Batch> make_dataset(const DatasetSpec& spec, int in_dim, int out_dim,
                                int batch_size);

/// Hash covering the spec and the generation parameters; embedded in cache
/// files so a stale cache cannot be silently reused.
std::uint64_t dataset_spec_hash(const DatasetSpec& spec, int in_dim, int out_dim,
                                int batch_size);

/// Flat binary cache: header (magic, version, spec hash) + row-major fp64
/// payload per batch.
void write_dataset_cache(const std::filesystem::path& path, const DatasetSpec& spec,
                         int in_dim, int out_dim, int batch_size,
                         const std::vector<Batch>& batches);
std::vector<Batch> read_dataset_cache(const std::filesystem::path& path,
                                      const DatasetSpec& spec, int in_dim, int out_dim,
                                      int batch_size);

}  // namespace normforge
