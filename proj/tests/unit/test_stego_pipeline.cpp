#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "nerfsteg/container.hpp"
#include "nerfsteg/scene_dataset.hpp"
#include "nerfsteg/stego_pipeline.hpp"

using namespace nerfsteg;

namespace {

ViewRenderer procedural_renderer() {
  const auto scene = default_scene();
  return [scene](const ViewKey& key) {
    return render_image(ProceduralSource(scene), nullptr, key, procedural_render_settings(scene));
  };
}

Bytes text(const std::string& s) { return Bytes(s.begin(), s.end()); }

FieldParams small_field() {
  FieldConfig cfg;
  cfg.width = 16;
  cfg.depth = 2;
  return init_field(cfg, 3);
}

EmbedOptions small_embed_options() {
  EmbedOptions o;
  o.n_coarse = 8;
  o.n_fine = 8;
  return o;
}

// One trained backdoor on the analytic scene, shared by the tests below.
const BackdoorResult& shared_backdoor() {
  static const BackdoorResult r = train_backdoor(procedural_renderer(), ViewKey{}, text("sixteen byte msg"), {});
  return r;
}

}  // namespace

TEST(Backdoor, TrueKeyRecoversMessage) {
  const auto& r = shared_backdoor();
  EXPECT_GT(r.report.epochs_to_full, 0u);
  EXPECT_LE(r.report.epochs_to_full, 2000u);
  EXPECT_GT(r.report.wall_time_s, 0.0);
  EXPECT_EQ(r.report.trace.back().acc, 1.0);
  EXPECT_EQ(extract_message(procedural_renderer(), r.extractor, ViewKey{}), text("sixteen byte msg"));
}

TEST(Backdoor, ExtractionIsRepeatable) {
  const auto& r = shared_backdoor();
  const auto a = extract_message(procedural_renderer(), r.extractor, ViewKey{});
  const auto b = extract_message(procedural_renderer(), r.extractor, ViewKey{});
  EXPECT_EQ(a, b);
}

TEST(Backdoor, WrongKeyDoesNotYieldMessage) {
  const auto& r = shared_backdoor();
  const ViewKey wrong = ViewKey{}.with_offset(10, 0);
  const auto bits = extract_bits(r.extractor, procedural_renderer()(wrong));
  const double acc = decoding_accuracy(r.planes.bits, bits.bits);
  EXPECT_NEAR(acc, 0.5, 0.15);
  try {
    EXPECT_NE(planes_to_bits(bits), text("sixteen byte msg"));
  } catch (const CorruptionError&) {
  }
}

TEST(Backdoor, CapacityErrorForOversizedMessage) {
  const Bytes big(25000, 0x41);
  try {
    train_backdoor(procedural_renderer(), ViewKey{}, big, {});
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.max_bytes, 508u);
  }
}

TEST(Backdoor, NonConvergenceIsEmbedError) {
  EmbedOptions o;
  o.max_epochs = 2;
  EXPECT_THROW(train_backdoor(procedural_renderer(), ViewKey{}, text("x"), o), EmbedError);
}

TEST(Backdoor, KeyResolutionMustMatchExtractor) {
  ViewKey small;
  small.width = small.height = 32;
  EXPECT_THROW(extract_message(procedural_renderer(), shared_backdoor().extractor, small), DimensionError);
}

TEST(Embed, FieldBundleRoundTripAndDeterminism) {
  const auto field = small_field();
  const auto opts = small_embed_options();
  const auto a = embed(field, ViewKey{}, text("determinism"), opts);
  const auto b = embed(field, ViewKey{}, text("determinism"), opts);
  EXPECT_EQ(extract_message(a.bundle, ViewKey{}), text("determinism"));
  EXPECT_EQ(a.bundle.manifest.field_digest, field_digest(field));
  EXPECT_EQ(a.bundle.manifest.n_coarse, 8u);
  EXPECT_TRUE(encode_container(extractor_container(a.bundle.extractor, a.bundle.manifest)) ==
              encode_container(extractor_container(b.bundle.extractor, b.bundle.manifest)));
  EXPECT_EQ(a.report.epochs_to_full, b.report.epochs_to_full);
}

TEST(Embed, BundleCarriesNoViewpoint) {
  const auto field = small_field();
  ViewKey key;
  key.theta_deg = 123.456789;
  key.phi_deg = -54.321;
  const auto r = embed(field, key, text("k"), small_embed_options());
  const auto bytes = encode_container(extractor_container(r.bundle.extractor, r.bundle.manifest));
  for (const char* needle : {"theta", "phi", "123.45", "54.32"})
    EXPECT_EQ(bytes.find(needle), std::string::npos) << needle;
}

TEST(Embed, FieldDigestTracksWeights) {
  auto f = small_field();
  const auto d0 = field_digest(f);
  EXPECT_EQ(d0.size(), 16u);
  EXPECT_EQ(field_digest(f), d0);
  f.fine.rgb_out.bias[0] += 1e-3f;
  EXPECT_NE(field_digest(f), d0);
}

TEST(Sweep, OffsetsSortedAndConsistent) {
  const auto& r = shared_backdoor();
  const auto report = attacker_sweep(procedural_renderer(), r.extractor, r.planes, ViewKey{}, SweepAxis::theta,
                                     {5, 0, 1});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].offset_deg, 0.0);
  EXPECT_EQ(report.rows[1].offset_deg, 1.0);
  EXPECT_EQ(report.rows[2].offset_deg, 5.0);
  EXPECT_EQ(report.rows[0].acc, 1.0);
  EXPECT_EQ(report.rows[0].rs_bpp, 1.0);
  EXPECT_NEAR(report.rows[1].theta_deg, ViewKey{}.theta_deg + 1.0, 1e-12);
  EXPECT_EQ(report.rows[1].phi_deg, ViewKey{}.phi_deg);
  for (const auto& row : report.rows) EXPECT_EQ(row.rs_bpp, rs_bpp_from_accuracy(1.0, row.acc));
}

TEST(Sweep, CsvAndJsonFormats) {
  SweepReport rep;
  rep.axis = SweepAxis::both;
  rep.depth = 2;
  rep.rows.push_back({31.0, -29.0, 1.0, 0.1 + 0.2, rs_bpp_from_accuracy(2, 0.3)});
  rep.rows.push_back({30.0, -30.0, 0.0, 1.0, 2.0});
  const std::string csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta_deg,phi_deg,offset_deg,acc,rs_bpp");
  // Values round-trip exactly through the text.
  const auto second_line = csv.substr(csv.find('\n') + 1);
  double t, p, o, acc, bpp;
  ASSERT_EQ(std::sscanf(second_line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &p, &o, &acc, &bpp), 5);
  EXPECT_EQ(acc, 0.1 + 0.2);
  EXPECT_EQ(rep.to_csv(), csv);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["axis"], "both");
  EXPECT_EQ(j["depth"], 2);
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["acc"].get<double>(), 0.1 + 0.2);
}

TEST(Sweep, AxisParsing) {
  EXPECT_EQ(parse_axis("theta"), SweepAxis::theta);
  EXPECT_EQ(parse_axis("phi"), SweepAxis::phi);
  EXPECT_EQ(parse_axis("both"), SweepAxis::both);
  EXPECT_THROW(parse_axis("psi"), std::invalid_argument);
  EXPECT_EQ(axis_name(SweepAxis::phi), "phi");
  EXPECT_EQ(default_sweep_offsets(), (std::vector<double>{0, 0.1, 0.5, 1, 2, 5, 10, 30, 60, 90}));
}

TEST(Sweep, RejectsNonFiniteOffsets) {
  const auto& r = shared_backdoor();
  EXPECT_THROW(attacker_sweep(procedural_renderer(), r.extractor, r.planes, ViewKey{}, SweepAxis::theta, {NAN}),
               std::invalid_argument);
}

TEST(OffKey, ViewsAreFarFromKey) {
  const ViewKey key;
  const auto views = offkey_views(key);
  EXPECT_EQ(views.size(), 30u);
  for (const auto& v : views) {
    EXPECT_NO_THROW(v.validate());
    const double dt = std::abs(v.theta_deg - key.theta_deg), dp = std::abs(v.phi_deg - key.phi_deg);
    EXPECT_GE(std::max(dt, dp), 5.0);
  }
}

TEST(Capacity, RowsAreConsistent) {
  EmbedOptions o;
  const auto rows = capacity_evaluation(procedural_renderer(), ViewKey{}, text("capacity"), {1, 2}, o);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.secret_acc, 1.0);
    EXPECT_GT(r.epochs_to_full, 0u);
    EXPECT_NEAR(r.offkey_mean_rs_bpp,
                static_cast<double>(r.depth) * std::max(0.0, 2 * r.offkey_mean_acc - 1), 1e-9);
  }
  const auto csv = capacity_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "depth,epochs_to_100,wall_time_s,secret_acc,offkey_mean_acc,offkey_mean_rs_bpp");
  EXPECT_THROW(capacity_evaluation(procedural_renderer(), ViewKey{}, text("x"), {}, o), std::invalid_argument);
}
