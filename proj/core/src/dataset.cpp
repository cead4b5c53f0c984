#include "strokeforge/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"

namespace strokeforge {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    bits |= static_cast<std::make_unsigned_t<T>>(p[b]) << (8 * b);
  }
  return static_cast<T>(bits);
}

void generate_range(StrokeDataset& ds, const OracleConfig& cfg, bool discrete, std::uint64_t lo,
                    std::uint64_t hi) {
  const auto dim = ds.header.action_dim;
  const auto image_bytes = ds.header.image_bytes();
  for (std::uint64_t i = lo; i < hi; ++i) {
    Rng rng(mix_seed(cfg.seed, i));
    OracleConfig record_cfg = cfg;
    Image stroke;
    float* action_out = ds.actions.data() + i * dim;
    if (discrete) {
      const DiscreteAction dv = sample_discrete_action(rng, 0.25);
      record_cfg.seed = rng.next_u64();
      stroke = render_stroke_discrete(dv, record_cfg);
      const auto encoded = encode_discrete(dv);
      std::ranges::copy(encoded, action_out);
    } else {
      const Action a = sample_action(rng);
      record_cfg.seed = rng.next_u64();
      stroke = render_stroke(a, record_cfg);
      std::ranges::copy(a.values, action_out);
    }
    const auto bytes = to_bytes(stroke);
    std::ranges::copy(bytes, ds.images.begin() + static_cast<std::ptrdiff_t>(i * image_bytes));
  }
}

void check_header(const DatasetHeader& h, const std::filesystem::path& path) {
  if (h.version != kDatasetVersion) {
    throw IoError("unsupported dataset version in " + path.string());
  }
  const bool dim_ok = h.discrete() ? h.action_dim == kDiscreteActionDim : h.action_dim == kActionDim;
  if (!dim_ok) throw IoError("unexpected action_dim in " + path.string());
  if (h.height < 8 || h.width < 8) throw IoError("bad image size in " + path.string());
}

DatasetHeader parse_header(const std::uint8_t* p, const std::filesystem::path& path) {
  if (std::memcmp(p, kDatasetMagic, 4) != 0) throw IoError("not a stroke dataset: " + path.string());
  DatasetHeader h;
  h.version = get_le<std::uint32_t>(p + 4);
  h.count = get_le<std::uint64_t>(p + 8);
  h.action_dim = get_le<std::uint32_t>(p + 16);
  h.height = get_le<std::uint32_t>(p + 20);
  h.width = get_le<std::uint32_t>(p + 24);
  h.flags = get_le<std::uint32_t>(p + 28);
  check_header(h, path);
  return h;
}

}  // namespace

std::span<const float> StrokeDataset::action(std::size_t i) const {
  return std::span<const float>(actions).subspan(i * header.action_dim, header.action_dim);
}

std::span<const std::uint8_t> StrokeDataset::image_bytes(std::size_t i) const {
  const auto n = header.image_bytes();
  return std::span<const std::uint8_t>(images).subspan(i * n, n);
}

Image StrokeDataset::image(std::size_t i) const {
  return from_bytes(image_bytes(i), static_cast<int>(header.height), static_cast<int>(header.width));
}

StrokeDataset generate_dataset(std::uint64_t n, const OracleConfig& cfg, bool discrete, int workers) {
  if (n == 0) throw InvalidArgument("dataset size must be >= 1");
  cfg.validate();
  StrokeDataset ds;
  ds.header.count = n;
  ds.header.action_dim = discrete ? kDiscreteActionDim : kActionDim;
  ds.header.height = static_cast<std::uint32_t>(cfg.canvas_size);
  ds.header.width = static_cast<std::uint32_t>(cfg.canvas_size);
  ds.header.flags = discrete ? kDatasetFlagDiscrete : 0U;
  ds.actions.resize(n * ds.header.action_dim);
  ds.images.resize(n * ds.header.image_bytes());

  workers = std::max(1, workers);
  if (workers == 1 || n < static_cast<std::uint64_t>(workers)) {
    generate_range(ds, cfg, discrete, 0, n);
    return ds;
  }
  std::vector<std::jthread> threads;
  const std::uint64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::uint64_t lo = std::min(n, chunk * w);
    const std::uint64_t hi = std::min(n, lo + chunk);
    threads.emplace_back([&ds, &cfg, discrete, lo, hi] { generate_range(ds, cfg, discrete, lo, hi); });
  }
  return ds;
}

void write_dataset(const StrokeDataset& ds, const std::filesystem::path& path) {
  std::vector<std::uint8_t> header;
  header.insert(header.end(), kDatasetMagic, kDatasetMagic + 4);
  put_le<std::uint32_t>(header, ds.header.version);
  put_le<std::uint64_t>(header, ds.header.count);
  put_le<std::uint32_t>(header, ds.header.action_dim);
  put_le<std::uint32_t>(header, ds.header.height);
  put_le<std::uint32_t>(header, ds.header.width);
  put_le<std::uint32_t>(header, ds.header.flags);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  std::vector<std::uint8_t> record;
  record.reserve(ds.header.record_bytes());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    record.clear();
    for (float v : ds.action(i)) put_le<std::uint32_t>(record, std::bit_cast<std::uint32_t>(v));
    const auto img = ds.image_bytes(i);
    record.insert(record.end(), img.begin(), img.end());
    out.write(reinterpret_cast<const char*>(record.data()), static_cast<std::streamsize>(record.size()));
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::array<std::uint8_t, kDatasetHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw IoError("truncated dataset header in " + path.string());
  }
  return parse_header(buf.data(), path);
}

StrokeDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::array<std::uint8_t, kDatasetHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw IoError("truncated dataset header in " + path.string());
  }
  StrokeDataset ds;
  ds.header = parse_header(buf.data(), path);
  const auto dim = ds.header.action_dim;
  const auto image_bytes = ds.header.image_bytes();
  ds.actions.resize(ds.header.count * dim);
  ds.images.resize(ds.header.count * image_bytes);
  std::vector<std::uint8_t> record(ds.header.record_bytes());
  for (std::uint64_t i = 0; i < ds.header.count; ++i) {
    in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()));
    if (in.gcount() != static_cast<std::streamsize>(record.size())) {
      throw IoError("truncated dataset record " + std::to_string(i) + " in " + path.string());
    }
    for (std::uint32_t k = 0; k < dim; ++k) {
      ds.actions[i * dim + k] = std::bit_cast<float>(get_le<std::uint32_t>(record.data() + 4 * k));
    }
    std::copy(record.begin() + 4 * dim, record.end(),
              ds.images.begin() + static_cast<std::ptrdiff_t>(i * image_bytes));
  }
  return ds;
}

void generate_dataset_file(std::uint64_t n, const OracleConfig& cfg, bool discrete,
                           const std::filesystem::path& path, int workers) {
  write_dataset(generate_dataset(n, cfg, discrete, workers), path);
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<std::uint8_t>(buf[static_cast<std::size_t>(i)]);
      hash *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

}  // namespace strokeforge
