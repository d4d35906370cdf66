#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "hmof/error.hpp"
#include "hmof/frame.hpp"
#include "support.hpp"

using namespace hmof;
using hmof::testing::TempDir;
using hmof::testing::constant_frame;

TEST(Frame, RejectsBrokenInvariants) {
  EXPECT_THROW(Frame(0, 4, {}), std::invalid_argument);
  EXPECT_THROW(Frame(2, 2, std::vector<float>(3, 0.0f)), std::invalid_argument);
  EXPECT_THROW(Frame(1, 1, std::vector<float>{1.5f}), std::invalid_argument);
  EXPECT_THROW(Frame(1, 1, std::vector<float>{-0.1f}), std::invalid_argument);
  EXPECT_NO_THROW(Frame(1, 1, std::vector<float>{1.0f}));
}

TEST(FrameSequence, ReindexesAndRejectsMixedSizes) {
  FrameSequence seq;
  seq.push_back(constant_frame(4, 3, 0.2f, 17));
  seq.push_back(constant_frame(4, 3, 0.3f, 5));
  EXPECT_EQ(seq[0].index(), 0u);
  EXPECT_EQ(seq[1].index(), 1u);
  EXPECT_THROW(seq.push_back(constant_frame(3, 3, 0.1f)), DataError);
  EXPECT_EQ(seq.size(), 2u);
}

TEST(Partition, QvgaFrame) {
  const PatchGrid g = partition(320, 240, 20);
  EXPECT_EQ(g.rows(), 12);
  EXPECT_EQ(g.cols(), 16);
  EXPECT_EQ(g.patch_count(), 192u);
}

TEST(Partition, SinglePatch) {
  const PatchGrid g = partition(20, 20, 20);
  ASSERT_EQ(g.patch_count(), 1u);
  EXPECT_EQ(g.origin(0), (PixelCoord{0, 0}));
}

TEST(Partition, RemainderStripsUnassigned) {
  const PatchGrid g = partition(330, 245, 20);
  EXPECT_EQ(g.rows(), 12);
  EXPECT_EQ(g.cols(), 16);
  EXPECT_EQ(g.patch_of(319, 239), g.id_at(11, 15));
  EXPECT_EQ(g.patch_of(320, 10), g.patch_count());
  EXPECT_EQ(g.patch_of(10, 240), g.patch_count());
  EXPECT_EQ(g.patch_of(329, 244), g.patch_count());
}

TEST(Partition, RejectsBadPatchSize) {
  EXPECT_THROW(partition(320, 240, 0), std::invalid_argument);
  EXPECT_THROW(partition(320, 240, 241), std::invalid_argument);
  EXPECT_THROW(partition(10, 30, 11), std::invalid_argument);
  EXPECT_THROW(partition(320, 240, 20).origin(192), std::out_of_range);
}

TEST(Partition, IsAPackingAndOriginsAreBijective) {
  for (auto [w, h, s] : {std::tuple{320, 240, 20}, {330, 245, 20}, {37, 23, 5}, {9, 9, 1}}) {
    const PatchGrid g = partition(w, h, s);
    std::vector<int> owners(static_cast<std::size_t>(w) * h, 0);
    std::set<std::pair<int, int>> origins;
    for (std::size_t id = 0; id < g.patch_count(); ++id) {
      const PixelCoord o = g.origin(id);
      EXPECT_TRUE(origins.insert({o.x, o.y}).second);
      EXPECT_EQ(g.id_at(o.y / s, o.x / s), id);
      ASSERT_LE(o.x + s, w);
      ASSERT_LE(o.y + s, h);
      for (int y = o.y; y < o.y + s; ++y)
        for (int x = o.x; x < o.x + s; ++x) {
          ++owners[static_cast<std::size_t>(y) * w + x];
          EXPECT_EQ(g.patch_of(x, y), id);
        }
    }
    std::size_t assigned = 0;
    for (int c : owners) {
      EXPECT_LE(c, 1);
      assigned += static_cast<std::size_t>(c);
    }
    EXPECT_EQ(assigned, g.patch_count() * s * s);
  }
}

TEST(SlicePatch, CopiesRowMajor) {
  std::vector<int> values(6 * 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<int>(i);
  const PatchGrid g = partition(6, 4, 2);
  const auto p = slice_patch<int>(values, 6, g, g.id_at(1, 2));
  EXPECT_EQ(p, (std::vector<int>{16, 17, 22, 23}));
}

namespace {

void write_frames(const std::filesystem::path& dir, int count, int w, int h) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    std::vector<float> px(static_cast<std::size_t>(w) * h);
    for (std::size_t p = 0; p < px.size(); ++p) px[p] = static_cast<float>((p * 7 + i * 13) % 256) / 255.0f;
    char name[16];
    std::snprintf(name, sizeof name, "%03d.pgm", i);
    write_pgm(dir / name, Frame(w, h, px));
  }
}

}  // namespace

TEST(LoadSequence, ReadsSortedQvgaFrames) {
  TempDir tmp("load");
  write_frames(tmp.path(), 3, 320, 240);
  std::ofstream(tmp / "notes.txt") << "ignored";
  const FrameSequence seq = load_sequence(tmp.path(), "*.pgm");
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.width(), 320);
  EXPECT_EQ(seq.height(), 240);
  EXPECT_FLOAT_EQ(seq[2].at(0, 0), static_cast<float>(26) / 255.0f);
}

TEST(LoadSequence, EmptyDirectory) {
  TempDir tmp("empty");
  try {
    load_sequence(tmp.path(), "*.pgm");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no frames matched"), std::string::npos);
  }
}

TEST(LoadSequence, DimensionMismatchNamesFile) {
  TempDir tmp("mismatch");
  write_frames(tmp.path(), 3, 320, 240);
  write_pgm(tmp / "001.pgm", constant_frame(100, 100, 0.5f));
  try {
    load_sequence(tmp.path(), "*.pgm");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("001.pgm"), std::string::npos) << e.what();
  }
}

TEST(LoadSequence, UndecodableFileNamed) {
  TempDir tmp("garbage");
  std::ofstream(tmp / "000.pgm") << "P2 not binary";
  try {
    load_sequence(tmp.path(), "*.pgm");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("000.pgm"), std::string::npos);
  }
}

TEST(ImageIo, PgmRoundTripIsBitIdentical) {
  TempDir tmp("roundtrip");
  write_frames(tmp / "a", 2, 31, 17);
  const FrameSequence first = load_sequence(tmp / "a", "*.pgm");
  std::filesystem::create_directories(tmp / "b");
  for (const Frame& f : first) {
    char name[16];
    std::snprintf(name, sizeof name, "%03zu.pgm", f.index());
    write_pgm(tmp / "b" / name, f);
  }
  const FrameSequence second = load_sequence(tmp / "b", "*.pgm");
  ASSERT_EQ(second.size(), first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    const auto a = first[i].intensity(), b = second[i].intensity();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(ImageIo, SixteenBitPgm) {
  TempDir tmp("pgm16");
  {
    std::ofstream out(tmp / "x.pgm", std::ios::binary);
    out << "P5\n2 1\n65535\n";
    const unsigned char px[] = {0xFF, 0xFF, 0x00, 0x00};
    out.write(reinterpret_cast<const char*>(px), 4);
  }
  const Frame f = read_image(tmp / "x.pgm");
  EXPECT_FLOAT_EQ(f.at(0, 0), 1.0f);
  EXPECT_FLOAT_EQ(f.at(1, 0), 0.0f);
}

TEST(ImageIo, ByteQuantization) {
  EXPECT_EQ(to_byte(0.0f), 0);
  EXPECT_EQ(to_byte(1.0f), 255);
  EXPECT_EQ(to_byte(0.5f), 128);
}
