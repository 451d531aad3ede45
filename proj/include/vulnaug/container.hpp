#pragma once

// On-disk dataset container.
//
// A dataset is a directory holding three files:
//
//   manifest.json    dimensions and class counts
//   samples.jsonl    one metadata record per sample, in write order
//   embeddings.bin   L*d little-endian float32 values per sample, row-major,
//                    at the byte offset named by the sample's record
//
// Records are written with a fixed key order and no timestamps, so two writes
// of the same samples produce byte-identical directories.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vulnaug/error.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

inline constexpr int kContainerVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kSamplesFile = "samples.jsonl";
inline constexpr const char* kEmbeddingsFile = "embeddings.bin";

struct Manifest {
  int version = kContainerVersion;
  std::size_t block_size = 0;
  std::size_t dim = 0;
  std::size_t num_samples = 0;
  std::size_t num_vulnerable = 0;
  std::size_t num_clean = 0;
  std::size_t num_with_flaw_spans = 0;

  std::size_t sample_bytes() const { return block_size * dim * sizeof(float); }

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Metadata for one sample; the embedding lives in the tensor store at `offset`.
struct SampleRecord {
  SampleId id = 0;
  Label label = Label::clean;
  std::vector<TokenId> token_ids;
  std::vector<FlawSpan> flaw_spans;
  Provenance provenance;
  std::uint64_t offset = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// ---------------------------------------------------------------------------
// JSON encoding
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["block_size"] = m.block_size;
  j["dim"] = m.dim;
  j["num_samples"] = m.num_samples;
  j["num_vulnerable"] = m.num_vulnerable;
  j["num_clean"] = m.num_clean;
  j["num_with_flaw_spans"] = m.num_with_flaw_spans;
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.version = j.at("version").get<int>();
    m.block_size = j.at("block_size").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.num_samples = j.at("num_samples").get<std::size_t>();
    m.num_vulnerable = j.at("num_vulnerable").get<std::size_t>();
    m.num_clean = j.at("num_clean").get<std::size_t>();
    m.num_with_flaw_spans = j.at("num_with_flaw_spans").get<std::size_t>();
    if (m.version != kContainerVersion) throw_data("unsupported container version " + std::to_string(m.version));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed manifest: ") + e.what());
  }
}

inline nlohmann::ordered_json provenance_to_json(const Provenance& p) {
  nlohmann::ordered_json j;
  if (p.is_original()) {
    j["kind"] = "original";
    return j;
  }
  j["kind"] = "augmented";
  j["method"] = to_string(*p.method);
  j["parents"] = p.parents;
  j["conditioned"] = p.conditioned;
  return j;
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "original") return Provenance::original();
  if (kind != "augmented") throw_data("unknown provenance kind '" + kind + "'");
  return Provenance::augmented(parse_method(j.at("method").get<std::string>()),
                               j.at("parents").get<std::vector<SampleId>>(), j.value("conditioned", false));
}

inline std::string record_to_jsonl(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["label"] = to_string(r.label);
  j["n"] = r.token_ids.size();
  j["token_ids"] = r.token_ids;
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : r.flaw_spans) spans.push_back({s.start, s.end});
  j["flaw_spans"] = std::move(spans);
  j["provenance"] = provenance_to_json(r.provenance);
  j["offset"] = r.offset;
  return j.dump();
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.id = j.at("id").get<SampleId>();
  r.label = parse_label(j.at("label").get<std::string>());
  r.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
  if (j.at("n").get<std::size_t>() != r.token_ids.size()) {
    throw_data("sample " + std::to_string(r.id) + ": n does not match token_ids length");
  }
  for (const auto& s : j.at("flaw_spans")) {
    if (!s.is_array() || s.size() != 2) throw_data("sample " + std::to_string(r.id) + ": flaw span must be [start,end]");
    r.flaw_spans.push_back({s[0].get<std::uint32_t>(), s[1].get<std::uint32_t>()});
  }
  r.provenance = provenance_from_json(j.at("provenance"));
  r.offset = j.at("offset").get<std::uint64_t>();
  return r;
}

// ---------------------------------------------------------------------------
// Float32 little-endian encoding
// ---------------------------------------------------------------------------

inline void encode_floats(std::span<const float> values, std::vector<unsigned char>& out) {
  out.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<unsigned char>(bits);
    out[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
    out[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
    out[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
  }
}

inline void decode_floats(std::span<const unsigned char> bytes, std::span<float> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = std::bit_cast<float>(bits);
  }
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Class-balance report in the layout of the usual vulnerability dataset table.
struct DatasetStats {
  std::size_t total = 0;
  std::size_t vulnerable = 0;
  std::size_t vulnerable_with_spans = 0;
  std::size_t vulnerable_without_spans = 0;
  std::size_t clean = 0;

  /// "1:x.y" (clean per vulnerable, one decimal) or "n/a" without vulnerable samples.
  std::string ratio() const {
    if (vulnerable == 0) return "n/a";
    std::ostringstream os;
    os << "1:" << std::fixed << std::setprecision(1)
       << static_cast<double>(clean) / static_cast<double>(vulnerable);
    return os.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["vulnerable"] = vulnerable;
    j["with_flaw_lines"] = vulnerable_with_spans;
    j["without_flaw_lines"] = vulnerable_without_spans;
    j["clean"] = clean;
    j["all"] = total;
    j["ratio"] = ratio();
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    auto row = [&os](const std::string& name, const std::string& value) {
      os << std::left << std::setw(28) << name << std::right << std::setw(12) << value << '\n';
    };
    row("Vulnerable", std::to_string(vulnerable));
    row("  w/ flaw lines specified", std::to_string(vulnerable_with_spans));
    row("  w/o flaw lines specified", std::to_string(vulnerable_without_spans));
    row("Clean", std::to_string(clean));
    row("All", std::to_string(total));
    row("Ratio", ratio());
    return os.str();
  }
};

inline DatasetStats stats_from_counts(std::size_t vulnerable, std::size_t with_spans, std::size_t clean) {
  DatasetStats s;
  s.vulnerable = vulnerable;
  s.vulnerable_with_spans = with_spans;
  s.vulnerable_without_spans = vulnerable - with_spans;
  s.clean = clean;
  s.total = vulnerable + clean;
  return s;
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_internal("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw_internal("write failed: " + path.string());
}

inline Manifest recount(const std::vector<SampleRecord>& records, std::size_t block_size, std::size_t dim) {
  Manifest m;
  m.block_size = block_size;
  m.dim = dim;
  m.num_samples = records.size();
  for (const auto& r : records) {
    if (r.label == Label::vulnerable) {
      ++m.num_vulnerable;
      if (!r.flaw_spans.empty()) ++m.num_with_flaw_spans;
    } else {
      ++m.num_clean;
    }
  }
  return m;
}

}  // namespace detail

/// Append-only streaming writer. Samples are written in call order; the
/// manifest is written by finish().
class DatasetWriter {
public:
  DatasetWriter(const std::filesystem::path& dir, std::size_t block_size, std::size_t dim)
      : dir_(dir), manifest_{kContainerVersion, block_size, dim} {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw_internal("cannot create " + dir_.string() + ": " + ec.message());
    records_out_.open(dir_ / kSamplesFile, std::ios::binary | std::ios::trunc);
    tensors_out_.open(dir_ / kEmbeddingsFile, std::ios::binary | std::ios::trunc);
    if (!records_out_ || !tensors_out_) throw_internal("cannot open container files in " + dir_.string());
    std::filesystem::remove(dir_ / kManifestFile, ec);
  }

  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  const Manifest& manifest() const noexcept { return manifest_; }

  void append(const EmbeddingSample& s) {
    if (finished_) throw_internal("append after finish");
    validate_sample(s, manifest_.block_size, manifest_.dim);
    if (!ids_.insert(s.id).second) throw_data("duplicate sample id " + std::to_string(s.id));

    SampleRecord r{s.id, s.label, s.token_ids, s.flaw_spans, s.provenance, next_offset_};
    records_out_ << record_to_jsonl(r) << '\n';
    encode_floats(s.embedding.values(), buffer_);
    tensors_out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    if (!records_out_ || !tensors_out_) throw_internal("write failed in " + dir_.string());
    next_offset_ += manifest_.sample_bytes();

    ++manifest_.num_samples;
    if (s.label == Label::vulnerable) {
      ++manifest_.num_vulnerable;
      if (!s.flaw_spans.empty()) ++manifest_.num_with_flaw_spans;
    } else {
      ++manifest_.num_clean;
    }
  }

  Manifest finish() {
    if (finished_) return manifest_;
    records_out_.close();
    tensors_out_.close();
    if (records_out_.fail() || tensors_out_.fail()) throw_internal("closing container files failed");
    detail::write_text_file(dir_ / kManifestFile, manifest_to_json(manifest_).dump(2) + "\n");
    finished_ = true;
    return manifest_;
  }

private:
  std::filesystem::path dir_;
  Manifest manifest_;
  std::ofstream records_out_;
  std::ofstream tensors_out_;
  std::unordered_set<SampleId> ids_;
  std::uint64_t next_offset_ = 0;
  std::vector<unsigned char> buffer_;
  bool finished_ = false;
};

/// Writes every sample of `samples` in order. All samples must share one shape;
/// for an empty range the shape comes from `block_size` / `dim`.
template <typename Range>
Manifest write_dataset(const Range& samples, const std::filesystem::path& dir, std::size_t block_size = 0,
                       std::size_t dim = 0) {
  auto it = std::begin(samples);
  if (it != std::end(samples)) {
    block_size = it->embedding.rows();
    dim = it->embedding.cols();
  }
  DatasetWriter writer(dir, block_size, dim);
  for (const auto& s : samples) writer.append(s);
  return writer.finish();
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

namespace detail {

class FileHandle {
public:
  FileHandle() = default;
  explicit FileHandle(const std::filesystem::path& path) : fd_(::open(path.c_str(), O_RDONLY | O_CLOEXEC)) {
    if (fd_ < 0) throw_data("cannot open " + path.string() + ": " + std::strerror(errno));
  }
  FileHandle(FileHandle&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  FileHandle& operator=(FileHandle&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
  ~FileHandle() { reset(); }

  int get() const noexcept { return fd_; }

  std::uint64_t size() const {
    struct stat st{};
    if (::fstat(fd_, &st) != 0) throw_internal(std::string("fstat failed: ") + std::strerror(errno));
    return static_cast<std::uint64_t>(st.st_size);
  }

private:
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

}  // namespace detail

/// Read-only view of a container. Metadata is held in memory; embeddings are
/// fetched on demand with a positioned read, so concurrent readers are safe.
class DatasetReader {
public:
  explicit DatasetReader(const std::filesystem::path& dir) : dir_(dir) {
    std::ifstream mf(dir_ / kManifestFile);
    if (!mf) throw_data("missing " + (dir_ / kManifestFile).string());
    try {
      manifest_ = manifest_from_json(nlohmann::json::parse(mf));
    } catch (const nlohmann::json::exception& e) {
      throw_data(std::string("malformed manifest: ") + e.what());
    }

    std::ifstream rf(dir_ / kSamplesFile);
    if (!rf) throw_data("missing " + (dir_ / kSamplesFile).string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(rf, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        records_.push_back(record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw_data(kSamplesFile + std::string(":") + std::to_string(lineno) + ": " + e.what());
      }
    }

    tensors_ = detail::FileHandle(dir_ / kEmbeddingsFile);
    check_records();
  }

  const std::filesystem::path& path() const noexcept { return dir_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t block_size() const noexcept { return manifest_.block_size; }
  std::size_t dim() const noexcept { return manifest_.dim; }

  bool contains(SampleId id) const { return index_.contains(id); }

  std::size_t index_of(SampleId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw_data("unknown id " + std::to_string(id));
    return it->second;
  }

  const SampleRecord& record(SampleId id) const { return records_[index_of(id)]; }

  /// Loads the embedding at record position `index` with one positioned read.
  Matrix read_embedding_at(std::size_t index) const {
    const auto& r = records_.at(index);
    const std::size_t bytes = manifest_.sample_bytes();
    std::vector<unsigned char> buf(bytes);
    std::size_t done = 0;
    while (done < bytes) {
      const auto got = ::pread(tensors_.get(), buf.data() + done, bytes - done, static_cast<off_t>(r.offset + done));
      if (got < 0) {
        if (errno == EINTR) continue;
        throw_internal(std::string("read failed: ") + std::strerror(errno));
      }
      if (got == 0) throw_data("truncated tensor store: sample " + std::to_string(r.id));
      done += static_cast<std::size_t>(got);
    }
    Matrix m(manifest_.block_size, manifest_.dim);
    decode_floats(buf, m.values());
    return m;
  }

  /// Raw stored bytes of one embedding, for byte-level comparisons.
  std::vector<unsigned char> read_embedding_bytes(SampleId id) const {
    std::vector<unsigned char> out;
    encode_floats(read_embedding_at(index_of(id)).values(), out);
    return out;
  }

  EmbeddingSample sample_at(std::size_t index) const {
    const auto& r = records_.at(index);
    return EmbeddingSample{r.id, r.token_ids, read_embedding_at(index), r.label, r.flaw_spans, r.provenance};
  }

  EmbeddingSample read_sample(SampleId id) const { return sample_at(index_of(id)); }

  DatasetStats stats() const {
    const auto m = detail::recount(records_, manifest_.block_size, manifest_.dim);
    return stats_from_counts(m.num_vulnerable, m.num_with_flaw_spans, m.num_clean);
  }

  /// Full consistency check: manifest counts, offsets and tensor store size.
  void verify() const {
    const auto recounted = detail::recount(records_, manifest_.block_size, manifest_.dim);
    if (recounted != manifest_) throw_data("manifest counts do not match records in " + dir_.string());
    const std::uint64_t needed = static_cast<std::uint64_t>(records_.size()) * manifest_.sample_bytes();
    if (tensors_.size() < needed) throw_data("truncated tensor store in " + dir_.string());
  }

private:
  void check_records() {
    const std::uint64_t stride = manifest_.sample_bytes();
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!index_.emplace(r.id, i).second) throw_data("duplicate sample id " + std::to_string(r.id));
      if (r.offset != i * stride) throw_data("sample " + std::to_string(r.id) + ": offset out of sequence");
      if (r.token_ids.size() > manifest_.block_size) {
        throw_data("sample " + std::to_string(r.id) + ": more tokens than block size");
      }
      validate_spans(r.flaw_spans, r.token_ids.size(), r.id);
    }
    const auto recounted = detail::recount(records_, manifest_.block_size, manifest_.dim);
    if (recounted != manifest_) throw_data("manifest counts do not match records in " + dir_.string());
  }

  std::filesystem::path dir_;
  Manifest manifest_;
  std::vector<SampleRecord> records_;
  std::unordered_map<SampleId, std::size_t> index_;
  detail::FileHandle tensors_;
};

inline DatasetStats dataset_stats(const DatasetReader& reader) { return reader.stats(); }

/// Replaces samples.jsonl and manifest.json with `records`, leaving the tensor
/// store untouched. Records must keep their offsets.
inline Manifest rewrite_metadata(const std::filesystem::path& dir, const Manifest& base,
                                 const std::vector<SampleRecord>& records) {
  const auto manifest = detail::recount(records, base.block_size, base.dim);
  const auto tmp = dir / (std::string(kSamplesFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_internal("cannot write " + tmp.string());
    for (const auto& r : records) out << record_to_jsonl(r) << '\n';
    if (!out) throw_internal("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / kSamplesFile);
  detail::write_text_file(dir / kManifestFile, manifest_to_json(manifest).dump(2) + "\n");
  return manifest;
}

}  // namespace vulnaug
