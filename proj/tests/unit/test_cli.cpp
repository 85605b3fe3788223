#include <gtest/gtest.h>

#include <sstream>

#include "nerfsteg/cli.hpp"
#include "nerfsteg/container.hpp"
#include "tempdir.hpp"

using namespace nerfsteg;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Field, key, message and a trained extractor in one scratch directory.
class CliWorkspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new nerfsteg::testing::TempDir("nerfsteg-cli");
    FieldConfig cfg;
    cfg.width = 16;
    cfg.depth = 2;
    save_field(path("field.nrsg"), init_field(cfg, 5));
    write_file(path("m.bin"), std::string("cli message\x00\xff", 13));
    const auto k = run_cli({"keygen", "--theta", "30", "--phi", "-30", "--out", path("key.json")});
    ASSERT_EQ(k.code, 0) << k.err;
    const auto e = run_cli({"embed", "--model", path("field.nrsg"), "--key", path("key.json"), "--message",
                            path("m.bin"), "--n-coarse", "8", "--n-fine", "8", "--out", path("ext.nrsg")});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& name) { return (*dir_ / name).string(); }

  static nerfsteg::testing::TempDir* dir_;
};

nerfsteg::testing::TempDir* CliWorkspace::dir_ = nullptr;

}  // namespace

TEST_F(CliWorkspace, KeygenWritesTheKey) {
  const auto key = load_key(path("key.json"));
  EXPECT_EQ(key.theta_deg, 30.0);
  EXPECT_EQ(key.phi_deg, -30.0);
  EXPECT_EQ(key.width, 64u);
  EXPECT_EQ(key.focal_px, default_focal(64));
}

TEST_F(CliWorkspace, EmbedThenExtractRoundTrips) {
  const auto r = run_cli({"extract", "--model", path("field.nrsg"), "--extractor", path("ext.nrsg"), "--key",
                          path("key.json"), "--out", path("out.bin")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(path("out.bin")), read_file(path("m.bin")));
}

TEST_F(CliWorkspace, SweepWritesOneRowPerOffset) {
  const auto r = run_cli({"sweep", "--model", path("field.nrsg"), "--extractor", path("ext.nrsg"), "--key",
                          path("key.json"), "--message", path("m.bin"), "--axis", "theta", "--offsets", "0,1,5",
                          "--out", path("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(path("sweep.csv"));
  EXPECT_EQ(count_lines(csv), 4u);
  std::istringstream lines(csv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "theta_deg,phi_deg,offset_deg,acc,rs_bpp");
  double t, p, o, acc, bpp;
  ASSERT_EQ(std::sscanf(first.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &p, &o, &acc, &bpp), 5);
  EXPECT_EQ(o, 0.0);
  EXPECT_EQ(acc, 1.0);
}

TEST_F(CliWorkspace, SweepJsonOutput) {
  const auto r = run_cli({"sweep", "--model", path("field.nrsg"), "--extractor", path("ext.nrsg"), "--key",
                          path("key.json"), "--message", path("m.bin"), "--axis", "both", "--offsets", "0",
                          "--out", path("sweep.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(read_file(path("sweep.json")));
  EXPECT_EQ(j["axis"], "both");
  EXPECT_EQ(j["rows"].size(), 1u);
}

TEST_F(CliWorkspace, RenderWritesAnImage) {
  const auto r = run_cli({"render", "--model", path("field.nrsg"), "--key", path("key.json"), "--n-coarse", "8",
                          "--n-fine", "8", "--out", path("view.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto img = read_image(path("view.png"));
  EXPECT_EQ(img.shape(), (Shape{3, 64, 64}));
}

TEST_F(CliWorkspace, ExtractWithMissingFileIsModuleError) {
  const auto r = run_cli({"extract", "--model", path("nope.nrsg"), "--extractor", path("ext.nrsg"), "--key",
                          path("key.json"), "--out", path("x.bin")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(count_lines(r.err), 1u);
}

TEST(Cli, UnknownCommandIsUsageError) { EXPECT_EQ(run_cli({"frobnicate"}).code, 2); }

TEST(Cli, MissingRequiredOptionIsUsageError) { EXPECT_EQ(run_cli({"keygen", "--theta", "10"}).code, 2); }

TEST(Cli, NoCommandIsUsageError) { EXPECT_EQ(run_cli({}).code, 2); }

TEST(Cli, BadAxisIsUsageError) {
  EXPECT_EQ(run_cli({"sweep", "--model", "m", "--extractor", "e", "--key", "k", "--message", "x", "--axis", "psi",
                     "--out", "o.csv"})
                .code,
            2);
}

TEST(Cli, InvalidKeyIsModuleError) {
  nerfsteg::testing::TempDir dir;
  const auto r = run_cli({"keygen", "--phi", "45", "--out", (dir / "k.json").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, TrainNerfWritesALoadableField) {
  nerfsteg::testing::TempDir dir;
  const auto out = (dir / "f.nrsg").string();
  const auto r = run_cli({"train-nerf", "--scene", "procedural", "--res", "16", "--views", "4", "--iters", "3",
                          "--batch", "16", "--net-width", "16", "--n-coarse", "4", "--n-fine", "4", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_field(out).config.width, 16u);
}

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run_cli({"--help"}).code, 0); }
