#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "vulnaug/container.hpp"

namespace vulnaug {
namespace {

using testing::TempDir;

EmbeddingSample make(SampleId id, Label label, std::size_t n, std::size_t block, std::size_t dim, float base) {
  EmbeddingSample s;
  s.id = id;
  s.label = label;
  for (std::size_t t = 0; t < n; ++t) s.token_ids.push_back(static_cast<TokenId>(100 + t));
  s.embedding = Matrix(block, dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dim; ++c) s.embedding(r, c) = base + static_cast<float>(r * dim + c);
  }
  return s;
}

TEST(Container, ManifestCountsAndRatio) {
  TempDir dir("manifest");
  std::vector<EmbeddingSample> samples{make(0, Label::clean, 2, 4, 2, 0.f), make(1, Label::clean, 3, 4, 2, 1.f),
                                       make(2, Label::vulnerable, 4, 4, 2, 2.f)};
  const auto m = write_dataset(samples, dir.path());
  EXPECT_EQ(m.num_samples, 3u);
  EXPECT_EQ(m.num_clean, 2u);
  EXPECT_EQ(m.num_vulnerable, 1u);

  const DatasetReader reader(dir.path());
  EXPECT_EQ(reader.manifest(), m);
  EXPECT_EQ(reader.stats().ratio(), "1:2.0");
  reader.verify();
}

TEST(Container, EmptyStream) {
  TempDir dir("empty");
  const std::vector<EmbeddingSample> none;
  const auto m = write_dataset(none, dir.path(), 4, 2);
  EXPECT_EQ(m.num_samples, 0u);
  const DatasetReader reader(dir.path());
  EXPECT_EQ(reader.size(), 0u);
  EXPECT_EQ(reader.stats().ratio(), "n/a");
}

TEST(Container, RoundTripIsBitExact) {
  TempDir dir("roundtrip");
  std::mt19937_64 gen(5);
  std::vector<EmbeddingSample> samples;
  for (SampleId id = 0; id < 100; ++id) {
    samples.push_back(testing::random_sample(gen, id * 3 + 1, 8, 5, id % 4 == 0 ? Label::vulnerable : Label::clean));
  }
  // Special float values must survive as raw bytes.
  samples[3].embedding(0, 0) = -0.0f;
  samples[3].embedding(0, 1) = std::numeric_limits<float>::denorm_min();
  samples[3].embedding(0, 2) = std::numeric_limits<float>::quiet_NaN();
  samples[7].provenance = Provenance::augmented(Method::binary_interpolation, {1, 4}, true);
  write_dataset(samples, dir.path());

  const DatasetReader reader(dir.path());
  ASSERT_EQ(reader.size(), samples.size());
  for (const auto& s : samples) {
    const auto back = reader.read_sample(s.id);
    std::vector<unsigned char> expected;
    encode_floats(s.embedding.values(), expected);
    EXPECT_EQ(reader.read_embedding_bytes(s.id), expected) << "id " << s.id;
    EXPECT_EQ(back.token_ids, s.token_ids);
    EXPECT_EQ(back.flaw_spans, s.flaw_spans);
    EXPECT_EQ(back.provenance, s.provenance);
    EXPECT_EQ(back.label, s.label);
  }
}

TEST(Container, OffsetsAdvanceByOneBlock) {
  TempDir dir("offsets");
  std::mt19937_64 gen(1);
  std::vector<EmbeddingSample> samples;
  for (SampleId id = 0; id < 10; ++id) samples.push_back(testing::random_sample(gen, id, 6, 3, Label::clean));
  write_dataset(samples, dir.path());
  const DatasetReader reader(dir.path());
  for (std::size_t i = 0; i < reader.size(); ++i) EXPECT_EQ(reader.records()[i].offset, i * 6 * 3 * 4);
  EXPECT_EQ(std::filesystem::file_size(dir / kEmbeddingsFile), 10u * 6 * 3 * 4);
}

TEST(Container, ReadSampleAndPadding) {
  TempDir dir("padding");
  std::vector<EmbeddingSample> samples{make(7, Label::vulnerable, 2, 4, 3, 1.f), make(8, Label::clean, 4, 4, 3, 0.f)};
  write_dataset(samples, dir.path());
  const DatasetReader reader(dir.path());
  const auto s = reader.read_sample(7);
  EXPECT_EQ(s.embedding, samples[0].embedding);
  for (std::size_t r = 2; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(testing::same_bytes(s.embedding(r, c), 0.0f));
  }
}

TEST(Container, UnknownId) {
  TempDir dir("unknown");
  std::vector<EmbeddingSample> samples{make(0, Label::clean, 1, 2, 2, 0.f), make(1, Label::clean, 1, 2, 2, 0.f),
                                       make(2, Label::vulnerable, 1, 2, 2, 0.f)};
  write_dataset(samples, dir.path());
  const DatasetReader reader(dir.path());
  try {
    reader.read_sample(999);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("unknown id"), std::string::npos);
  }
}

TEST(Container, WriterRejectsBadInput) {
  TempDir dir("reject");
  DatasetWriter writer(dir.path(), 4, 2);
  writer.append(make(1, Label::clean, 2, 4, 2, 0.f));
  EXPECT_THROW(writer.append(make(1, Label::clean, 2, 4, 2, 0.f)), Error);  // duplicate id
  EXPECT_THROW(writer.append(make(2, Label::clean, 2, 5, 2, 0.f)), Error);  // shape mismatch
  auto bad = make(3, Label::vulnerable, 2, 4, 2, 0.f);
  bad.flaw_spans = {{1, 3}};  // beyond n = 2
  EXPECT_THROW(writer.append(bad), Error);
  bad.flaw_spans = {{0, 2}, {1, 2}};  // overlapping
  EXPECT_THROW(writer.append(bad), Error);
}

TEST(Container, TruncatedTensorStore) {
  TempDir dir("truncated");
  std::vector<EmbeddingSample> samples{make(0, Label::clean, 2, 4, 2, 0.f), make(1, Label::vulnerable, 2, 4, 2, 0.f)};
  write_dataset(samples, dir.path());
  std::filesystem::resize_file(dir / kEmbeddingsFile, 4 * 2 * 4 + 5);
  const DatasetReader reader(dir.path());
  EXPECT_NO_THROW(reader.read_sample(0));
  EXPECT_THROW(reader.read_sample(1), Error);
  EXPECT_THROW(reader.verify(), Error);
}

TEST(Container, TamperedManifestIsRejected) {
  TempDir dir("tampered");
  std::vector<EmbeddingSample> samples{make(0, Label::clean, 2, 4, 2, 0.f)};
  write_dataset(samples, dir.path());
  auto m = manifest_from_json(nlohmann::json::parse(testing::slurp(dir / kManifestFile)));
  m.num_vulnerable = 5;
  std::ofstream(dir / kManifestFile) << manifest_to_json(m).dump();
  EXPECT_THROW(DatasetReader{dir.path()}, Error);
}

TEST(Container, RecordLayout) {
  SampleRecord r;
  r.id = 4;
  r.label = Label::vulnerable;
  r.token_ids = {9, 8, 7};
  r.flaw_spans = {{0, 2}};
  r.offset = 64;
  EXPECT_EQ(record_to_jsonl(r),
            R"({"id":4,"label":"vuln","n":3,"token_ids":[9,8,7],"flaw_spans":[[0,2]],"provenance":{"kind":"original"},"offset":64})");
}

TEST(Stats, BigVulTableCounts) {
  const auto st = stats_from_counts(8783, 5895, 142125);
  EXPECT_EQ(st.vulnerable_without_spans, 2888u);
  EXPECT_EQ(st.total, 150908u);
  EXPECT_EQ(st.ratio(), "1:16.2");
}

TEST(Stats, BalancedAndDegenerate) {
  EXPECT_EQ(stats_from_counts(10, 0, 10).ratio(), "1:1.0");
  EXPECT_EQ(stats_from_counts(0, 0, 10).ratio(), "n/a");
  EXPECT_EQ(stats_from_counts(0, 0, 0).total, 0u);
}

TEST(Types, MergeSpansUnionsOverlaps) {
  const auto merged = merge_spans({{4, 8}, {2, 6}, {10, 12}});
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[0].start, 2u);
  EXPECT_EQ(merged[0].end, 8u);
  EXPECT_EQ(merged[1].start, 10u);
}

}  // namespace
}  // namespace vulnaug
