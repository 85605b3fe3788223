#include "nerfsteg/stego_pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>

namespace nerfsteg {

namespace {

std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_key_matches(const ViewKey& key, const ExtractorConfig& config) {
  if (key.height != config.height || key.width != config.width)
    throw DimensionError("key resolution " + std::to_string(key.width) + "x" + std::to_string(key.height) +
                         " does not match the extractor's " + std::to_string(config.width) + "x" +
                         std::to_string(config.height));
}

}  // namespace

RenderSettings stego_render_settings(const Manifest& manifest) {
  RenderSettings s;
  s.n_coarse = manifest.n_coarse;
  s.n_fine = manifest.n_fine;
  s.background = manifest.background;
  s.jitter = false;
  s.seed = manifest.render_seed;
  return s;
}

ViewRenderer field_renderer(const FieldParams& field, const Manifest& manifest) {
  const RenderSettings settings = stego_render_settings(manifest);
  return [&field, settings](const ViewKey& key) { return render_field(field, key, settings); };
}

std::string field_digest(const FieldParams& field) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 0x100000001b3ull;
  };
  for (const auto& [name, t] : field.named_tensors()) {
    feed(name.data(), name.size());
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      const unsigned char le[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                   static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
      feed(le, 4);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BackdoorResult train_backdoor(const ViewRenderer& render, const ViewKey& key, std::span<const std::uint8_t> message,
                              const EmbedOptions& options) {
  key.validate();
  BitPlanes planes = bits_to_planes(message, options.depth, key.height, key.width);
  const auto start = std::chrono::steady_clock::now();
  const Tensor secret = render(key);

  ExtractorTrainOptions train;
  train.epochs = options.max_epochs;
  train.lr = options.lr;
  train.seed = options.seed;
  train.init = options.init;
  train.output_gain = options.output_gain;
  train.on_epoch = options.on_epoch;
  auto trained = train_extractor(secret, planes, train);
  if (!trained.epochs_to_full)
    throw EmbedError("extractor reached accuracy " + fmt_exact(trained.trace.back().acc) + " after " +
                     std::to_string(options.max_epochs) + " epochs without converging; raise --epochs or lower --depth");

  BackdoorResult result{std::move(trained.params), std::move(planes), {}};
  result.report.epochs_to_full = *trained.epochs_to_full;
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.report.trace = std::move(trained.trace);
  return result;
}

EmbedResult embed(const FieldParams& field, const ViewKey& key, std::span<const std::uint8_t> message,
                  const EmbedOptions& options) {
  Manifest manifest;
  manifest.depth = options.depth;
  manifest.height = key.height;
  manifest.width = key.width;
  manifest.n_coarse = options.n_coarse;
  manifest.n_fine = options.n_fine;
  manifest.render_seed = options.seed;
  manifest.field_digest = field_digest(field);

  auto backdoor = train_backdoor(field_renderer(field, manifest), key, message, options);
  EmbedResult result;
  result.bundle = StegoBundle{field, std::move(backdoor.extractor), std::move(manifest)};
  result.report = std::move(backdoor.report);
  return result;
}

Bytes extract_message(const ViewRenderer& render, const ExtractorParams& extractor, const ViewKey& key) {
  key.validate();
  check_key_matches(key, extractor.config);
  return planes_to_bits(extract_bits(extractor, render(key)));
}

Bytes extract_message(const StegoBundle& bundle, const ViewKey& key) {
  return extract_message(field_renderer(bundle.field, bundle.manifest), bundle.extractor, key);
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "theta") return SweepAxis::theta;
  if (name == "phi") return SweepAxis::phi;
  if (name == "both") return SweepAxis::both;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected theta, phi or both)");
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::theta: return "theta";
    case SweepAxis::phi: return "phi";
    case SweepAxis::both: return "both";
  }
  return "theta";
}

std::string SweepReport::to_csv() const {
  std::string out = "theta_deg,phi_deg,offset_deg,acc,rs_bpp\n";
  for (const auto& r : rows)
    out += fmt_exact(r.theta_deg) + "," + fmt_exact(r.phi_deg) + "," + fmt_exact(r.offset_deg) + "," +
           fmt_exact(r.acc) + "," + fmt_exact(r.rs_bpp) + "\n";
  return out;
}

std::string SweepReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["axis"] = axis_name(axis);
  doc["depth"] = depth;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    doc["rows"].push_back({{"theta_deg", r.theta_deg},
                           {"phi_deg", r.phi_deg},
                           {"offset_deg", r.offset_deg},
                           {"acc", r.acc},
                           {"rs_bpp", r.rs_bpp}});
  return doc.dump(2) + "\n";
}

std::vector<double> default_sweep_offsets() { return {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0, 90.0}; }

SweepReport attacker_sweep(const ViewRenderer& render, const ExtractorParams& extractor, const BitPlanes& truth,
                           const ViewKey& true_key, SweepAxis axis, std::vector<double> offsets) {
  for (double o : offsets)
    if (!std::isfinite(o)) throw std::invalid_argument("attacker_sweep: offsets must be finite");
  check_key_matches(true_key, extractor.config);
  std::stable_sort(offsets.begin(), offsets.end());
  SweepReport report;
  report.axis = axis;
  report.depth = truth.depth;
  for (double o : offsets) {
    const double dtheta = axis == SweepAxis::phi ? 0.0 : o;
    const double dphi = axis == SweepAxis::theta ? 0.0 : o;
    const ViewKey probe = true_key.with_offset(dtheta, dphi);
    const BitPlanes bits = extract_bits(extractor, render(probe));
    SweepRow row{probe.theta_deg, probe.phi_deg, o, decoding_accuracy(truth.bits, bits.bits), 0.0};
    row.rs_bpp = rs_bpp_from_accuracy(static_cast<double>(truth.depth), row.acc);
    report.rows.push_back(row);
  }
  return report;
}

SweepReport attacker_sweep(const StegoBundle& bundle, const BitPlanes& truth, const ViewKey& true_key,
                           SweepAxis axis, std::vector<double> offsets) {
  return attacker_sweep(field_renderer(bundle.field, bundle.manifest), bundle.extractor, truth, true_key, axis,
                        std::move(offsets));
}

std::vector<ViewKey> offkey_views(const ViewKey& key) {
  std::vector<ViewKey> views;
  for (double dt : {5.0, 10.0, 20.0, 45.0, 90.0})
    for (double sign : {1.0, -1.0})
      for (double dp : {0.0, 10.0, -10.0}) views.push_back(key.with_offset(sign * dt, dp));
  return views;
}

OffKeyStats evaluate_offkey(const ViewRenderer& render, const ExtractorParams& extractor, const BitPlanes& truth,
                            const ViewKey& key) {
  OffKeyStats stats;
  for (const auto& view : offkey_views(key)) {
    const double acc = decoding_accuracy(truth.bits, extract_bits(extractor, render(view)).bits);
    stats.accuracies.push_back(acc);
    stats.mean_acc += acc;
    stats.max_acc = std::max(stats.max_acc, acc);
  }
  stats.mean_acc /= static_cast<double>(stats.accuracies.size());
  stats.mean_rs_bpp = rs_bpp_from_accuracy(static_cast<double>(truth.depth), stats.mean_acc);
  return stats;
}

std::vector<CapacityRow> capacity_evaluation(const ViewRenderer& render, const ViewKey& key,
                                             std::span<const std::uint8_t> message,
                                             const std::vector<std::size_t>& depths, const EmbedOptions& options) {
  if (depths.empty()) throw std::invalid_argument("capacity_evaluation: no depths given");
  std::vector<CapacityRow> rows;
  for (std::size_t d : depths) {
    EmbedOptions opts = options;
    opts.depth = d;
    const auto backdoor = train_backdoor(render, key, message, opts);
    CapacityRow row;
    row.depth = d;
    row.epochs_to_full = backdoor.report.epochs_to_full;
    row.wall_time_s = backdoor.report.wall_time_s;
    row.secret_acc = decoding_accuracy(backdoor.planes.bits, extract_bits(backdoor.extractor, render(key)).bits);
    const auto off = evaluate_offkey(render, backdoor.extractor, backdoor.planes, key);
    row.offkey_mean_acc = off.mean_acc;
    row.offkey_mean_rs_bpp = off.mean_rs_bpp;
    rows.push_back(row);
  }
  return rows;
}

std::string capacity_csv(const std::vector<CapacityRow>& rows) {
  std::string out = "depth,epochs_to_100,wall_time_s,secret_acc,offkey_mean_acc,offkey_mean_rs_bpp\n";
  for (const auto& r : rows)
    out += std::to_string(r.depth) + "," + std::to_string(r.epochs_to_full) + "," + fmt_exact(r.wall_time_s) + "," +
           fmt_exact(r.secret_acc) + "," + fmt_exact(r.offkey_mean_acc) + "," + fmt_exact(r.offkey_mean_rs_bpp) +
           "\n";
  return out;
}

}  // namespace nerfsteg
