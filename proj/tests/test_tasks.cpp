// Synthetic task generators: nested list-operation expressions and
// dashed-contour connectivity images.

#include <cstdio>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "arena/tasks/listops.hpp"
#include "arena/tasks/pathfinder.hpp"

using namespace arena;
using namespace arena::tasks;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluator
// ---------------------------------------------------------------------------

TEST(ListOpsEval, WorkedExample) {
  // MIN(2,3)=2, MEDIAN(1,5,8,9,2)=5, so MAX(4,3,2,1,0,5) = 5.
  EXPECT_EQ(eval_listops(parse_listops("[MAX 4 3 [MIN 2 3] 1 0 [MEDIAN 1 5 8 9 2]]")), 5);
}

TEST(ListOpsEval, SimpleCases) {
  EXPECT_EQ(eval_listops(parse_listops("[MIN 2 3]")), 2);
  EXPECT_EQ(eval_listops(parse_listops("[SUM_MOD 5 6 9]")), 0);  // 20 mod 10
  EXPECT_EQ(eval_listops(parse_listops("[MAX 0 9 1]")), 9);
  EXPECT_EQ(eval_listops(parse_listops("[MEDIAN 1 5 8 9 2]")), 5);
}

TEST(ListOpsEval, MedianEvenCountIsFloorOfCentralMean) {
  EXPECT_EQ(eval_listops(parse_listops("[MEDIAN 1 2 3 4]")), 2);  // floor(2.5)
  EXPECT_EQ(eval_listops(parse_listops("[MEDIAN 2 9]")), 5);      // floor(5.5)
  EXPECT_EQ(eval_listops(parse_listops("[MEDIAN 4 4 6 6]")), 5);  // exact mean
}

TEST(ListOpsEval, ClosureFuzz) {
  // Evaluator outputs stay in 0-9 over a large fuzz of random trees.
  Rng rng(21);
  auto samples = gen_listops(rng, 40, 4, 100000);
  for (const auto& s : samples) {
    EXPECT_GE(s.label, 0);
    EXPECT_LE(s.label, 9);
  }
}

// ---------------------------------------------------------------------------
// Parser / serializer
// ---------------------------------------------------------------------------

TEST(ListOpsParse, RoundTripProperty) {
  Rng rng(22);
  auto samples = gen_listops(rng, 120, 5, 200);
  for (const auto& s : samples) {
    ListOpsExpr e = parse_listops(s.tokens);
    EXPECT_EQ(serialize(e), s.tokens);
    EXPECT_EQ(parse_listops(serialize(e)), e);
  }
}

TEST(ListOpsParse, ErrorsCarryPosition) {
  EXPECT_THROW(parse_listops(""), ParseError);
  EXPECT_THROW(parse_listops("[MAX 1 2"), ParseError);     // missing closer
  EXPECT_THROW(parse_listops("[FOO 1 ]"), ParseError);     // unknown operator
  EXPECT_THROW(parse_listops("[MAX ]"), ParseError);       // no operands
  EXPECT_THROW(parse_listops("[MAX 1 ] 2"), ParseError);   // trailing tokens
  EXPECT_THROW(parse_listops("[MAX 12 ]"), ParseError);    // multi-digit leaf
  try {
    parse_listops("[MAX 1 x ]");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("token 2"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

TEST(ListOpsGen, LabelsMatchEvaluatorOracle) {
  Rng rng(23);
  auto samples = gen_listops(rng, 200, 6, 1000);
  for (const auto& s : samples)
    EXPECT_EQ(s.label, eval_listops(parse_listops(s.tokens)));
}

TEST(ListOpsGen, MaxDepthOneMeansNoNesting) {
  Rng rng(24);
  for (const auto& s : gen_listops(rng, 100, 1, 200))
    EXPECT_EQ(std::count(s.tokens.begin(), s.tokens.end(), '['), 1) << s.tokens;
}

TEST(ListOpsGen, RespectsLengthBudget) {
  Rng rng(25);
  for (const auto& s : gen_listops(rng, 30, 8, 500))
    EXPECT_LE(serialized_length(parse_listops(s.tokens)), 30);
}

TEST(ListOpsGen, SameSeedByteIdenticalFiles) {
  std::string p1 = temp_path("listops_a.tsv"), p2 = temp_path("listops_b.tsv");
  Rng r1(7), r2(7);
  write_listops(p1, gen_listops(r1, 80, 3, 100));
  write_listops(p2, gen_listops(r2, 80, 3, 100));
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_FALSE(b1.empty());
  EXPECT_EQ(b1, b2);
}

TEST(ListOpsGen, ParamValidation) {
  Rng rng(26);
  EXPECT_THROW(gen_listops(rng, 4, 2, 1), ParamError);   // budget below minimum
  EXPECT_THROW(gen_listops(rng, 50, 0, 1), ParamError);  // depth < 1
}

TEST(ListOpsFile, RoundTripAndErrors) {
  std::string p = temp_path("listops_io.tsv");
  Rng rng(27);
  auto samples = gen_listops(rng, 60, 3, 50);
  write_listops(p, samples);
  auto back = read_listops(p);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].tokens, samples[i].tokens);
    EXPECT_EQ(back[i].label, samples[i].label);
  }
  std::ofstream(temp_path("listops_bad.tsv")) << "[MAX 1 ] not_a_number\n";
  EXPECT_THROW(read_listops(temp_path("listops_bad.tsv")), ParseError);
  std::ofstream(temp_path("listops_notab.tsv")) << "[MAX 1 ]\n";
  EXPECT_THROW(read_listops(temp_path("listops_notab.tsv")), ParseError);
}

TEST(ListOpsTokens, FixedIdScheme) {
  auto ids = listops_token_ids("[MAX 4 [SUM_MOD 0 9 ] ]");
  EXPECT_EQ(ids, (std::vector<int>{10, 4, 13, 0, 9, 14, 14}));
  EXPECT_THROW(listops_token_ids("[MAX foo ]"), ParseError);
}

// ---------------------------------------------------------------------------
// Pixel sequences
// ---------------------------------------------------------------------------

TEST(PixelSequence, RowMajorFlattening) {
  auto s = image_to_sequence({1, 2, 3, 4}, 2, 2);
  EXPECT_EQ(s.tokens, (std::vector<int>{1, 2, 3, 4}));
  std::vector<std::uint8_t> white(1024, 255);
  auto w = image_to_sequence(white, 32, 32);
  EXPECT_EQ(w.tokens.size(), 1024u);
  for (int t : w.tokens) EXPECT_EQ(t, 255);
}

TEST(PixelSequence, RoundTripInverse) {
  Rng rng(31);
  std::vector<std::uint8_t> grid(7 * 5);
  for (auto& b : grid) b = static_cast<std::uint8_t>(rng.uniform_int(256));
  auto s = image_to_sequence(grid, 7, 5);
  EXPECT_EQ(sequence_to_image(s), grid);
}

TEST(PixelSequence, ShapeValidation) {
  EXPECT_THROW(image_to_sequence({1, 2, 3}, 2, 2), ShapeError);
}

// ---------------------------------------------------------------------------
// Contour-connectivity generator
// ---------------------------------------------------------------------------

TEST(Pathfinder, ParamValidation) {
  EXPECT_THROW(pathfinder_params(64), ParamError);
  EXPECT_THROW(pathfinder_params(32, 0), ParamError);
}

TEST(Pathfinder, SequenceLengths) {
  Rng rng(41);
  auto small = gen_pathfinder(rng, 32, 2);
  EXPECT_EQ(small[0].pixels.tokens.size(), 1024u);
  Rng rng2(42);
  auto big = gen_pathfinder(rng2, 128, 2);
  EXPECT_EQ(big[0].pixels.tokens.size(), 16384u);
}

TEST(Pathfinder, LabelsMatchConstructionAndBfs) {
  // Labels are consistent with the construction's gap-tolerant dash
  // breadth-first search: connected for positives, disconnected for
  // negatives, and marker centers stay >= 2 px apart.
  PathfinderParams p = pathfinder_params(32);
  Rng rng(43);
  for (int i = 0; i < 1000; ++i) {
    int label = i % 2;
    auto scene = gen_pathfinder_scene(rng, p, label);
    EXPECT_EQ(scene.label, label);
    EXPECT_EQ(detail::dashes_connected(scene.dashes, scene.a, scene.b, p.gap + 0.5f,
                                       p.gap + p.marker_radius + 0.5f),
              label == 1);
    float dx = scene.a.x - scene.b.x, dy = scene.a.y - scene.b.y;
    EXPECT_GE(dx * dx + dy * dy, 4.0f);
    EXPECT_EQ(scene.grid.size(), 1024u);
  }
}

TEST(Pathfinder, ClassBalanceAtTenThousand) {
  Rng rng(44);
  auto samples = gen_pathfinder(rng, 32, 10000);
  int pos = 0;
  for (const auto& s : samples) pos += s.label;
  EXPECT_GE(pos, 4800);
  EXPECT_LE(pos, 5200);
}

TEST(Pathfinder, LargeVariantIsScaledSmallVariant) {
  PathfinderParams s = pathfinder_params(32), l = pathfinder_params(128);
  EXPECT_EQ(l.dash_len, s.dash_len);
  EXPECT_EQ(l.gap, s.gap);
  EXPECT_EQ(l.distractors, s.distractors);
  EXPECT_EQ(l.walk_steps, 4 * s.walk_steps);       // path length scales with size
  EXPECT_EQ(l.marker_radius, 4 * s.marker_radius);  // marker scales with size
}

TEST(Pathfinder, RenderedGridIsBinaryAndNonEmpty) {
  PathfinderParams p = pathfinder_params(32);
  Rng rng(45);
  auto scene = gen_pathfinder_scene(rng, p, 1);
  int lit = 0;
  for (std::uint8_t b : scene.grid) {
    EXPECT_TRUE(b == 0 || b == 255);
    lit += b == 255;
  }
  EXPECT_GT(lit, 20);  // three dashed contours plus two markers
}

// ---------------------------------------------------------------------------
// Binary record format
// ---------------------------------------------------------------------------

TEST(PixelRecords, RoundTripWithSidecar) {
  Rng rng(46);
  auto samples = gen_pathfinder(rng, 32, 5);
  std::string p = temp_path("pf_records.bin");
  write_pixel_records(p, samples, {{"seed", 46}, {"size", 32}});
  auto back = read_pixel_records(p);
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].pixels.tokens, samples[i].pixels.tokens);
    EXPECT_EQ(back[i].pixels.height, samples[i].pixels.height);
    EXPECT_EQ(back[i].label, samples[i].label);
  }
  EXPECT_TRUE(std::filesystem::exists(p + ".json"));
}

TEST(PixelRecords, LittleEndianLayout) {
  PixelSample s;
  s.pixels = image_to_sequence({9, 8, 7, 6, 5, 4}, 2, 3);
  s.label = 1;
  std::string p = temp_path("pf_layout.bin");
  write_pixel_records(p, {s});
  std::ifstream f(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ASSERT_EQ(bytes.size(), 2u + 2u + 6u + 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 2);  // height u16 LE
  EXPECT_EQ(static_cast<unsigned char>(bytes[1]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[2]), 3);  // width u16 LE
  EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 9);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 1);  // label byte
}

TEST(PixelRecords, TruncatedFileRejected) {
  std::string p = temp_path("pf_trunc.bin");
  std::ofstream(p, std::ios::binary) << "\x02";
  EXPECT_THROW(read_pixel_records(p), ParseError);
}
