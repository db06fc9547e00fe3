#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "trajguide/config.hpp"
#include "trajguide/error.hpp"
#include "trajguide/io.hpp"
#include "unit/helpers.hpp"

using namespace trajguide;

namespace {

const char* kSmall = R"({
  "name": "small",
  "height": 16,
  "width": 16,
  "scene": {"channels": 2, "planes": [{"center": [0, 0, 6], "half_width": 5, "half_height": 5}]},
  "trajectory": {"kind": "orbit", "frames": 3, "sweep_deg": 4},
  "schedule": {"steps": 6},
  "guidance": {"rho": 0.5, "flow": {"fl_rule": "all"}},
  "seeds": [1, 2],
  "ablation": ["dsg"]
})";

}  // namespace

TEST(Io, TensorRoundTrip) {
  std::mt19937_64 gen(1);
  const Tensor t = testutil::random_tensor(Shape{3, 2, 5, 7}, gen);
  const auto dir = testutil::scratch("io_tensor");
  write_tensor(dir / "t.ltns", t);
  EXPECT_TRUE(testutil::bit_equal(read_tensor(dir / "t.ltns"), t));
  EXPECT_EQ(std::filesystem::file_size(dir / "t.ltns"), 16u + t.size() * 8u);

  const ValidityMask m = testutil::random_mask(Shape{1, 2, 5, 7}, gen);
  write_mask(dir / "m.ltns", m);
  const ValidityMask mb = read_mask(dir / "m.ltns");
  EXPECT_TRUE(mb.shape() == m.shape());
  EXPECT_TRUE(std::equal(mb.values().begin(), mb.values().end(), m.values().begin()));
  EXPECT_THROW(read_mask(dir / "t.ltns"), Error);
}

TEST(Io, DepthRoundTrip) {
  DepthMap d(3, 4, 2.5);
  d.set(1, 2, 7.0);
  d.set_invalid(0, 0);
  const auto dir = testutil::scratch("io_depth");
  write_depth(dir / "d.ltns", d);
  const DepthMap b = read_depth(dir / "d.ltns");
  EXPECT_EQ(b.at(1, 2), 7.0);
  EXPECT_EQ(b.at(2, 3), 2.5);
  EXPECT_FALSE(b.valid(0, 0));
}

TEST(Io, PgmRoundTrip) {
  Tensor t(Shape{1, 1, 2, 3}, std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  const auto dir = testutil::scratch("io_pgm");
  write_pgm(dir / "a.pgm", t, 0, 0);
  const Tensor b = read_pgm(dir / "a.pgm");
  EXPECT_LE(max_abs_diff(b, t), 0.5 / 255.0 + 1e-12);
}

TEST(Io, RejectsCorruptFiles) {
  const auto dir = testutil::scratch("io_bad");
  std::ofstream(dir / "x.ltns") << "NOPE";
  EXPECT_THROW(read_tensor(dir / "x.ltns"), Error);
  EXPECT_THROW(read_tensor(dir / "missing.ltns"), Error);
}

TEST(Io, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string()), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Io, TensorHashSeesShapeAndValues) {
  const Tensor a(Shape{1, 1, 2, 3}, 1.0), b(Shape{1, 1, 3, 2}, 1.0);
  Tensor c = a;
  c[4] = 1.0 + 1e-15;
  EXPECT_NE(tensor_hash(a), tensor_hash(b));
  EXPECT_NE(tensor_hash(a), tensor_hash(c));
  EXPECT_EQ(tensor_hash(a), tensor_hash(Tensor(Shape{1, 1, 2, 3}, 1.0)));
}

TEST(Config, ParsesAndRoundTrips) {
  const ExperimentConfig cfg = parse_config(kSmall);
  EXPECT_EQ(cfg.name, "small");
  EXPECT_EQ(cfg.scene.channels, 2u);
  EXPECT_EQ(cfg.trajectory.frames, 3u);
  EXPECT_EQ(cfg.schedule.steps, 6u);
  EXPECT_EQ(cfg.guidance.rho, 0.5);
  EXPECT_EQ(cfg.guidance.flow_cfg.fl_rule, FlOutlierRule::kAll);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2}));
  const ExperimentConfig back = parse_config(config_to_json(cfg));
  EXPECT_TRUE(back == cfg);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(Config, HashIgnoresPlacement) {
  ExperimentConfig a = parse_config(kSmall);
  ExperimentConfig b = a;
  b.output_dir = "/elsewhere";
  b.parallel = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.guidance.rho = 0.75;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, RejectsUnknownKeys) {
  try {
    parse_config(R"({"guidance": {"rhoo": 1}})");
    FAIL() << "accepted unknown key";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("rhoo"), std::string::npos);
  }
}

TEST(Config, RejectsInvalidCombinations) {
  EXPECT_THROW(parse_config(R"({"seeds": [1, 1]})"), Error);
  EXPECT_THROW(parse_config(R"({"ablation": ["irr", "cfg"]})"), Error);
  EXPECT_THROW(parse_config(R"({"schedule": {"kind": "discrete_ddim", "t_max": 1.0}})"), Error);
  EXPECT_THROW(parse_config(R"({"height": 30, "embedding": {"pool": 4}})"), Error);
  EXPECT_THROW(parse_config(R"({"trajectory": {"frames": 1}})"), Error);
  EXPECT_THROW(parse_config("{not json"), Error);
}

TEST(Config, LoadsShippedBenchmark) {
  const ExperimentConfig cfg = load_config(TRAJGUIDE_SOURCE_DIR "/configs/desk_benchmark.json");
  EXPECT_EQ(cfg.ablation.size(), 3u);
  EXPECT_EQ(cfg.oracle.distractors.size(), 4u);
}

TEST(Config, AblationList) {
  EXPECT_EQ(parse_ablation_list("irr, flf ,dsg"), (std::vector<std::string>{"irr", "flf", "dsg"}));
  EXPECT_TRUE(parse_ablation_list("").empty());
}
