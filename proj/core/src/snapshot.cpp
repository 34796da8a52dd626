#include "memalign/snapshot.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "memalign/error.hpp"
#include "memalign/io_util.hpp"

namespace memalign {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'E', 'M', 'B', 'A', 'N', 'K', '\0'};

class Writer {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(pos_, std::string("truncated while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> snapshot(const MemoryBank& bank) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(bank.categories()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  w.u8(static_cast<std::uint8_t>(bank.policy().variant));
  w.f64(bank.policy().gamma);
  w.u64(bank.generation());
  for (std::size_t c = 0; c < bank.categories(); ++c) {
    w.u64(bank.capacity(static_cast<int>(c)));
    w.u64(bank.size(static_cast<int>(c)));
  }
  for (std::size_t c = 0; c < bank.categories(); ++c) {
    for (const auto& v : bank.slot(static_cast<int>(c))) {
      for (double x : v.view()) w.f64(x);
    }
  }
  return std::move(w).take();
}

MemoryBank load_snapshot(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(kMagic.size(), "magic");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(0, "bad magic, not a .membank file");
  }
  for (std::size_t i = 0; i < kMagic.size(); ++i) r.u8("magic");

  const std::size_t version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kSnapshotVersion) {
    throw FormatError(version_at, "unsupported version " + std::to_string(version));
  }
  const std::size_t categories_at = r.offset();
  const auto categories = r.u32("categories");
  if (categories < 2) throw FormatError(categories_at, "category count below 2");
  const std::size_t dim_at = r.offset();
  const auto dim = r.u32("dimension");
  if (dim == 0) throw FormatError(dim_at, "zero feature dimension");

  const std::size_t variant_at = r.offset();
  const auto variant = r.u8("storage variant");
  if (variant > 1) throw FormatError(variant_at, "unknown storage variant " + std::to_string(variant));
  const std::size_t gamma_at = r.offset();
  const double gamma = r.f64("gamma");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw FormatError(gamma_at, "gamma outside (0, 1]");
  const auto generation = r.u64("generation");

  std::vector<std::size_t> capacities(categories);
  std::vector<std::size_t> counts(categories);
  for (std::size_t c = 0; c < categories; ++c) {
    capacities[c] = r.u64("capacity");
    const std::size_t count_at = r.offset();
    counts[c] = r.u64("count");
    if (counts[c] > capacities[c]) {
      throw FormatError(count_at, "category " + std::to_string(c) + " holds more vectors than its capacity");
    }
  }

  MemoryBank bank(categories, dim,
                  StoragePolicy{static_cast<StorageVariant>(variant), gamma},
                  std::move(capacities), generation);
  std::uint32_t instance = 0;
  for (std::size_t c = 0; c < categories; ++c) {
    if (counts[c] > r.remaining() / (8 * static_cast<std::size_t>(dim))) {
      throw FormatError(r.offset(), "truncated payload for category " + std::to_string(c));
    }
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const std::size_t vector_at = r.offset();
      std::vector<double> values(dim);
      for (auto& x : values) x = r.f64("payload");
      InstanceRecord record{FeatureVector(std::move(values)), static_cast<int>(c),
                            static_cast<int>(c), 0, instance++};
      if (!record.feature.all_finite()) throw FormatError(vector_at, "non-finite payload value");
      bank.insert_filtered(record);
    }
  }
  if (r.remaining() != 0) throw FormatError(r.offset(), "trailing bytes after payload");
  return bank;
}

void write_snapshot_file(const MemoryBank& bank, const std::filesystem::path& path) {
  const auto bytes = snapshot(bank);
  write_file_atomically(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

MemoryBank read_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_snapshot(bytes);
}

}  // namespace memalign
