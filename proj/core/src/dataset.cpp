#include "normforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "normforge/errors.hpp"
#include "normforge/rng.hpp"

namespace normforge {

namespace {

constexpr std::uint32_t kCacheMagic = 0x4e464453;  // "NFDS"
constexpr std::uint32_t kCacheVersion = 1;

std::vector<Batch> split_batches(const Matrix& inputs, const Matrix& values,
                                 const std::vector<int>& classes, int batch_size) {
  const int n = inputs.rows();
  std::vector<Batch> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int rows = std::min(batch_size, n - start);
    Batch b;
    b.inputs = Matrix(rows, inputs.cols());
    b.target_values = Matrix(rows, values.cols());
    b.target_classes.resize(rows);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < inputs.cols(); ++c) b.inputs(r, c) = inputs(start + r, c);
      for (int c = 0; c < values.cols(); ++c) b.target_values(r, c) = values(start + r, c);
      b.target_classes[r] = classes[start + r];
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("dataset cache: truncated file");
  return v;
}

}  // namespace

void DatasetSpec::validate() const {
  if (size < 1) throw ConfigError("dataset: size must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("dataset: noise must be >= 0");
}

std::vector<Batch> make_dataset(const DatasetSpec& spec, int in_dim, int out_dim,
                                int batch_size) {
  spec.validate();
  if (in_dim < 1 || out_dim < 1) throw ConfigError("make_dataset: dims must be >= 1");
  if (batch_size < 1) throw ConfigError("make_dataset: batch_size must be >= 1");

  const int n = static_cast<int>(spec.size);
  Matrix inputs(n, in_dim);
  Matrix values(n, out_dim);
  std::vector<int> classes(n, 0);
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(spec.kind) + 0xda7aULL));

  switch (spec.kind) {
    case DatasetKind::TeacherNet: {
      // hidden random one-layer tanh network defines the targets
      const int hidden = std::max(8, in_dim);
      Matrix w1(hidden, in_dim), w2(out_dim, hidden);
      std::vector<double> b1(hidden), b2(out_dim);
      const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
      const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
      for (double& x : w1.data()) x = s1 * rng.normal();
      for (double& x : w2.data()) x = s2 * rng.normal();
      for (double& x : b1) x = 0.1 * rng.normal();
      for (double& x : b2) x = 0.1 * rng.normal();

      for (int r = 0; r < n; ++r) {
        std::vector<double> x(in_dim), h(hidden);
        for (int c = 0; c < in_dim; ++c) {
          x[c] = rng.normal();
          inputs(r, c) = x[c];
        }
        for (int i = 0; i < hidden; ++i) {
          double z = b1[i];
          for (int c = 0; c < in_dim; ++c) z += w1(i, c) * x[c];
          h[i] = std::tanh(z);
        }
        int best = 0;
        for (int o = 0; o < out_dim; ++o) {
          double z = b2[o];
          for (int i = 0; i < hidden; ++i) z += w2(o, i) * h[i];
          z += spec.noise * rng.normal();
          values(r, o) = z;
          if (z > values(r, best)) best = o;
        }
        classes[r] = best;
      }
      break;
    }
    case DatasetKind::GaussianBlobs: {
      const int k = out_dim;
      Matrix centers(k, in_dim);
      if (k == 2) {
        std::vector<double> u(in_dim);
        double nrm = 0.0;
        for (double& x : u) {
          x = rng.normal();
          nrm += x * x;
        }
        nrm = std::sqrt(nrm);
        for (int c = 0; c < in_dim; ++c) {
          centers(0, c) = 5.0 * u[c] / nrm;
          centers(1, c) = -5.0 * u[c] / nrm;
        }
      } else {
        for (int i = 0; i < k; ++i) {
          double nrm = 0.0;
          std::vector<double> u(in_dim);
          for (double& x : u) {
            x = rng.normal();
            nrm += x * x;
          }
          nrm = std::sqrt(nrm);
          for (int c = 0; c < in_dim; ++c) centers(i, c) = 5.0 * u[c] / nrm;
        }
      }
      for (int r = 0; r < n; ++r) {
        const int c0 = r % k;
        classes[r] = c0;
        for (int c = 0; c < in_dim; ++c) {
          inputs(r, c) = centers(c0, c) + spec.noise * rng.normal();
        }
        values(r, c0) = 1.0;
      }
      break;
    }
    case DatasetKind::CharCopy: {
      if (in_dim != out_dim) {
        throw ConfigError("char_copy: input and output widths must match");
      }
      for (int r = 0; r < n; ++r) {
        const int c0 = r % out_dim;
        classes[r] = c0;
        for (int c = 0; c < in_dim; ++c) {
          inputs(r, c) = (c == c0 ? 1.0 : 0.0) + spec.noise * rng.normal();
        }
        values(r, c0) = 1.0;
      }
      break;
    }
  }

  return split_batches(inputs, values, classes, batch_size);
}

std::uint64_t dataset_spec_hash(const DatasetSpec& spec, int in_dim, int out_dim,
                                int batch_size) {
  // FNV-1a over the generation-relevant fields
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint8_t kind = static_cast<std::uint8_t>(spec.kind);
  mix(&kind, 1);
  mix(&spec.size, sizeof(spec.size));
  mix(&spec.noise, sizeof(spec.noise));
  mix(&spec.seed, sizeof(spec.seed));
  mix(&in_dim, sizeof(in_dim));
  mix(&out_dim, sizeof(out_dim));
  mix(&batch_size, sizeof(batch_size));
  return h;
}

void write_dataset_cache(const std::filesystem::path& path, const DatasetSpec& spec,
                         int in_dim, int out_dim, int batch_size,
                         const std::vector<Batch>& batches) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("dataset cache: cannot open " + path.string() + " for writing");
  write_pod(os, kCacheMagic);
  write_pod(os, kCacheVersion);
  write_pod(os, dataset_spec_hash(spec, in_dim, out_dim, batch_size));
  write_pod(os, static_cast<std::uint32_t>(batches.size()));
  for (const auto& b : batches) {
    write_pod(os, static_cast<std::uint32_t>(b.inputs.rows()));
    write_pod(os, static_cast<std::uint32_t>(b.inputs.cols()));
    write_pod(os, static_cast<std::uint32_t>(b.target_values.cols()));
    os.write(reinterpret_cast<const char*>(b.inputs.data().data()),
             static_cast<std::streamsize>(b.inputs.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(b.target_values.data().data()),
             static_cast<std::streamsize>(b.target_values.size() * sizeof(double)));
    for (int c : b.target_classes) write_pod(os, static_cast<std::int32_t>(c));
  }
  if (!os) throw ConfigError("dataset cache: write failed for " + path.string());
}

std::vector<Batch> read_dataset_cache(const std::filesystem::path& path,
                                      const DatasetSpec& spec, int in_dim, int out_dim,
                                      int batch_size) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("dataset cache: cannot open " + path.string());
  if (read_pod<std::uint32_t>(is) != kCacheMagic) {
    throw ConfigError("dataset cache: bad magic in " + path.string());
  }
  if (read_pod<std::uint32_t>(is) != kCacheVersion) {
    throw ConfigError("dataset cache: unsupported version in " + path.string());
  }
  if (read_pod<std::uint64_t>(is) != dataset_spec_hash(spec, in_dim, out_dim, batch_size)) {
    throw ConfigError("dataset cache: spec hash mismatch in " + path.string());
  }
  const auto n_batches = read_pod<std::uint32_t>(is);
  std::vector<Batch> batches;
  batches.reserve(n_batches);
  for (std::uint32_t i = 0; i < n_batches; ++i) {
    const auto rows = read_pod<std::uint32_t>(is);
    const auto in_cols = read_pod<std::uint32_t>(is);
    const auto out_cols = read_pod<std::uint32_t>(is);
    Batch b;
    b.inputs = Matrix(static_cast<int>(rows), static_cast<int>(in_cols));
    b.target_values = Matrix(static_cast<int>(rows), static_cast<int>(out_cols));
    is.read(reinterpret_cast<char*>(b.inputs.data().data()),
            static_cast<std::streamsize>(b.inputs.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(b.target_values.data().data()),
            static_cast<std::streamsize>(b.target_values.size() * sizeof(double)));
    b.target_classes.resize(rows);
    for (auto& c : b.target_classes) c = read_pod<std::int32_t>(is);
    if (!is) throw ConfigError("dataset cache: truncated file " + path.string());
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace normforge
