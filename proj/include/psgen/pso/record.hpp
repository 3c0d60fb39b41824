#pragma once

// Acquisition record, 24 bytes little-endian:
//   u64 signature | u32 overflow | u32 timetag | i16 A homodyne | i16 A phase | i16 B homodyne | i16 B phase
// The overflow and timetag are those of the herald (coarse bin), before delays.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "psgen/common/error.hpp"
#include "psgen/hds/word.hpp"
#include "psgen/pso/signature.hpp"

namespace psgen::pso {

inline constexpr std::size_t kRecordBytes = 24;

struct Record {
  Signature signature;
  std::uint32_t overflow = 0;
  std::uint32_t timetag = 0;
  std::array<std::int16_t, 4> adc{};  // A homodyne, A phase, B homodyne, B phase

  /// Builds a record from the two HDS words (homodyne in the high half, phase in the low half).
  static Record from_words(Signature s, std::uint32_t overflow, std::uint32_t timetag, std::uint32_t word_a,
                           std::uint32_t word_b) {
    Record r{s, overflow, timetag, {}};
    r.adc[0] = static_cast<std::int16_t>(hds::high_half(word_a));
    r.adc[1] = static_cast<std::int16_t>(hds::low_half(word_a));
    r.adc[2] = static_cast<std::int16_t>(hds::high_half(word_b));
    r.adc[3] = static_cast<std::int16_t>(hds::low_half(word_b));
    return r;
  }

  std::uint32_t word(int side) const {
    return hds::pack_word(static_cast<std::uint16_t>(adc[2 * side]), static_cast<std::uint16_t>(adc[2 * side + 1]));
  }

  std::array<unsigned char, kRecordBytes> encode() const {
    static_assert(std::endian::native == std::endian::little);
    std::array<unsigned char, kRecordBytes> b{};
    const std::uint64_t raw = signature.raw();
    std::memcpy(b.data(), &raw, 8);
    std::memcpy(b.data() + 8, &overflow, 4);
    std::memcpy(b.data() + 12, &timetag, 4);
    std::memcpy(b.data() + 16, adc.data(), 8);
    return b;
  }

  static Record decode(const unsigned char* b) {
    Record r;
    std::uint64_t raw = 0;
    std::memcpy(&raw, b, 8);
    r.signature = Signature(raw);
    std::memcpy(&r.overflow, b + 8, 4);
    std::memcpy(&r.timetag, b + 12, 4);
    std::memcpy(r.adc.data(), b + 16, 8);
    return r;
  }

  friend bool operator==(const Record&, const Record&) = default;
};

inline std::vector<Record> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open record file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % kRecordBytes != 0) throw FormatError("record file size is not a multiple of 24: " + path.string());
  std::vector<Record> out;
  out.reserve(bytes.size() / kRecordBytes);
  for (std::size_t i = 0; i < bytes.size(); i += kRecordBytes)
    out.push_back(Record::decode(reinterpret_cast<const unsigned char*>(bytes.data() + i)));
  return out;
}

using SignatureClass = std::pair<unsigned, unsigned>;

inline std::string class_name(SignatureClass c) {
  return "class_" + std::to_string(c.first) + "_" + std::to_string(c.second);
}

/// Writes records into per-class files of at most `per_file` records each:
/// <dir>/<prefix>class_<n>_<m>_<part>.rec, part numbered from 0.
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path dir, std::size_t per_file = 10000, std::string prefix = "")
      : dir_(std::move(dir)), per_file_(per_file), prefix_(std::move(prefix)) {
    if (per_file_ == 0) throw DomainError("records per file must be positive");
    std::filesystem::create_directories(dir_);
  }

  void write(const Record& r) {
    auto& slot = open_[r.signature.klass()];
    if (!slot.stream || slot.in_file == per_file_) {
      if (slot.stream) slot.stream->close();
      const auto name = prefix_ + class_name(r.signature.klass()) + "_" + std::to_string(slot.part++) + ".rec";
      slot.stream = std::make_unique<std::ofstream>(dir_ / name, std::ios::binary | std::ios::trunc);
      if (!*slot.stream) throw FormatError("cannot create " + (dir_ / name).string());
      files_.push_back(dir_ / name);
      slot.in_file = 0;
    }
    const auto b = r.encode();
    slot.stream->write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    ++slot.in_file;
    ++slot.total;
  }

  void close() {
    for (auto& [c, slot] : open_)
      if (slot.stream) slot.stream->close();
  }

  std::map<SignatureClass, std::size_t> counts() const {
    std::map<SignatureClass, std::size_t> out;
    for (const auto& [c, slot] : open_) out[c] = slot.total;
    return out;
  }

  const std::vector<std::filesystem::path>& files() const { return files_; }
  const std::filesystem::path& directory() const { return dir_; }

  /// Every record of class c written under `dir` with `prefix`, in part order.
  static std::vector<Record> load_class(const std::filesystem::path& dir, SignatureClass c,
                                        const std::string& prefix = "") {
    std::vector<Record> out;
    for (int part = 0;; ++part) {
      const auto p = dir / (prefix + class_name(c) + "_" + std::to_string(part) + ".rec");
      if (!std::filesystem::exists(p)) break;
      auto more = read_records(p);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

 private:
  struct Slot {
    std::unique_ptr<std::ofstream> stream;
    std::size_t in_file = 0;
    std::size_t total = 0;
    int part = 0;
  };
  std::filesystem::path dir_;
  std::size_t per_file_;
  std::string prefix_;
  std::map<SignatureClass, Slot> open_;
  std::vector<std::filesystem::path> files_;
};

}  // namespace psgen::pso
