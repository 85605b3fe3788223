#include "nerfsteg/cli.hpp"

#include <CLI11.hpp>
#include <ostream>

#include "nerfsteg/container.hpp"
#include "nerfsteg/image_io.hpp"
#include "nerfsteg/scene_dataset.hpp"
#include "nerfsteg/stego_pipeline.hpp"

namespace nerfsteg::cli {

namespace {

struct Options {
  std::string scene = "procedural";
  std::string model, extractor, key, message, out;
  std::size_t res = 64, views = 20, iters = 2000, batch = 256, net_width = 128, n_coarse = 64, n_fine = 64;
  std::size_t depth = 1, epochs = 2000;
  double lr = 0.0;
  double theta = 30.0, phi = -30.0, radius = 4.0, focal = 0.0, near = 2.0, far = 6.0;
  std::uint64_t seed = 0;
  std::string axis = "theta";
  std::vector<double> offsets = default_sweep_offsets();
  std::vector<std::size_t> depths{1, 2, 3};
};

Bytes read_bytes(const std::string& path) {
  const std::string s = read_file(path);
  return Bytes(s.begin(), s.end());
}

void write_bytes(const std::string& path, const Bytes& b) { write_file(path, std::string(b.begin(), b.end())); }

EmbedOptions embed_options(const Options& o) {
  EmbedOptions e;
  e.depth = o.depth;
  e.max_epochs = o.epochs;
  e.lr = o.lr > 0.0 ? o.lr : 1e-5;
  e.seed = o.seed;
  e.n_coarse = o.n_coarse;
  e.n_fine = o.n_fine;
  return e;
}

int cmd_train_nerf(const Options& o, std::ostream& out) {
  std::vector<PosedImage> views;
  if (o.scene == "procedural") {
    ViewSamplingOptions v;
    v.n_views = o.views;
    v.width = v.height = o.res;
    v.seed = o.seed;
    views = generate_training_views(default_scene(), v);
  } else {
    LoadOptions l;
    l.target_width = o.res;
    views = load_nerf_synthetic(o.scene, l);
  }
  FieldConfig config;
  config.width = o.net_width;
  FieldTrainOptions t;
  t.iters = o.iters;
  t.batch_rays = o.batch;
  t.lr = o.lr > 0.0 ? o.lr : 5e-4;
  t.seed = o.seed;
  t.n_coarse = o.n_coarse;
  t.n_fine = o.n_fine;
  const auto result = train_field(views, config, t);
  save_field(o.out, result.params);
  out << "trained " << o.iters << " iterations, final loss " << result.loss_trace.back() << "\n";
  return kExitOk;
}

int cmd_keygen(const Options& o, std::ostream& out) {
  ViewKey key;
  key.theta_deg = o.theta;
  key.phi_deg = o.phi;
  key.radius = o.radius;
  key.width = key.height = o.res;
  key.focal_px = o.focal > 0.0 ? o.focal : default_focal(o.res);
  key.near = o.near;
  key.far = o.far;
  save_key(o.out, key);
  out << "wrote key " << o.out << "\n";
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const FieldParams field = load_field(o.model);
  const ViewKey key = load_key(o.key);
  Manifest m;
  m.n_coarse = o.n_coarse;
  m.n_fine = o.n_fine;
  m.render_seed = o.seed;
  write_image(o.out, render_field(field, key, stego_render_settings(m)));
  out << "wrote " << o.out << "\n";
  return kExitOk;
}

int cmd_embed(const Options& o, std::ostream& out) {
  const FieldParams field = load_field(o.model);
  const ViewKey key = load_key(o.key);
  const Bytes message = read_bytes(o.message);
  const auto result = embed(field, key, message, embed_options(o));
  save_extractor(o.out, result.bundle.extractor, result.bundle.manifest);
  out << "epochs_to_100 " << result.report.epochs_to_full << " wall_time_s " << result.report.wall_time_s << "\n";
  return kExitOk;
}

int cmd_extract(const Options& o, std::ostream& out) {
  const StegoBundle bundle = load_bundle(o.model, o.extractor);
  const ViewKey key = load_key(o.key);
  const Bytes message = extract_message(bundle, key);
  write_bytes(o.out, message);
  out << "extracted " << message.size() << " bytes\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const StegoBundle bundle = load_bundle(o.model, o.extractor);
  const ViewKey key = load_key(o.key);
  const BitPlanes truth =
      bits_to_planes(read_bytes(o.message), bundle.manifest.depth, bundle.manifest.height, bundle.manifest.width);
  const auto report = attacker_sweep(bundle, truth, key, parse_axis(o.axis), o.offsets);
  const bool as_json = std::filesystem::path(o.out).extension() == ".json";
  write_file(o.out, as_json ? report.to_json() : report.to_csv());
  out << "wrote " << report.rows.size() << " rows to " << o.out << "\n";
  return kExitOk;
}

int cmd_capacity(const Options& o, std::ostream& out) {
  const FieldParams field = load_field(o.model);
  const ViewKey key = load_key(o.key);
  const Bytes message = read_bytes(o.message);
  const EmbedOptions opts = embed_options(o);
  Manifest m;
  m.n_coarse = opts.n_coarse;
  m.n_fine = opts.n_fine;
  m.render_seed = opts.seed;
  const auto rows = capacity_evaluation(field_renderer(field, m), key, message, o.depths, opts);
  write_file(o.out, capacity_csv(rows));
  out << "wrote " << rows.size() << " rows to " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Hide messages in radiance fields behind a secret viewpoint", "nerfsteg"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train-nerf", "Train a radiance field on posed images");
  train->add_option("--scene", o.scene, "NeRF-Synthetic directory or 'procedural'");
  train->add_option("--res", o.res, "Square training resolution");
  train->add_option("--views", o.views, "Procedural training views");
  train->add_option("--iters", o.iters, "Training iterations");
  train->add_option("--batch", o.batch, "Rays per iteration");
  train->add_option("--net-width", o.net_width, "Hidden width of the MLPs");
  train->add_option("--n-coarse", o.n_coarse, "Coarse samples per ray");
  train->add_option("--n-fine", o.n_fine, "Fine samples per ray");
  train->add_option("--lr", o.lr, "Adam learning rate (default 5e-4)");
  train->add_option("--seed", o.seed);
  train->add_option("--out", o.out, "Field container to write")->required();

  auto* keygen = app.add_subcommand("keygen", "Write a viewpoint key file");
  keygen->add_option("--theta", o.theta, "Azimuth in degrees");
  keygen->add_option("--phi", o.phi, "Elevation in degrees");
  keygen->add_option("--radius", o.radius);
  keygen->add_option("--res", o.res);
  keygen->add_option("--focal", o.focal, "Focal length in pixels (default from resolution)");
  keygen->add_option("--near", o.near);
  keygen->add_option("--far", o.far);
  keygen->add_option("--out", o.out)->required();

  auto* render = app.add_subcommand("render", "Render a key's view to PPM or PNG");
  render->add_option("--model", o.model)->required();
  render->add_option("--key", o.key)->required();
  render->add_option("--n-coarse", o.n_coarse);
  render->add_option("--n-fine", o.n_fine);
  render->add_option("--seed", o.seed);
  render->add_option("--out", o.out)->required();

  auto* emb = app.add_subcommand("embed", "Train an extractor that reveals a message at the key's view");
  emb->add_option("--model", o.model)->required();
  emb->add_option("--key", o.key)->required();
  emb->add_option("--message", o.message)->required();
  emb->add_option("--depth", o.depth, "Bits per pixel D");
  emb->add_option("--epochs", o.epochs, "Maximum training epochs");
  emb->add_option("--lr", o.lr, "Adam learning rate (default 1e-5)");
  emb->add_option("--n-coarse", o.n_coarse);
  emb->add_option("--n-fine", o.n_fine);
  emb->add_option("--seed", o.seed);
  emb->add_option("--out", o.out, "Extractor container to write")->required();

  auto* ext = app.add_subcommand("extract", "Recover the message with a key");
  ext->add_option("--model", o.model)->required();
  ext->add_option("--extractor", o.extractor)->required();
  ext->add_option("--key", o.key)->required();
  ext->add_option("--out", o.out)->required();

  auto* sweep = app.add_subcommand("sweep", "Score extraction at viewpoints offset from the key");
  sweep->add_option("--model", o.model)->required();
  sweep->add_option("--extractor", o.extractor)->required();
  sweep->add_option("--key", o.key)->required();
  sweep->add_option("--message", o.message, "The embedded message, for ground-truth bits")->required();
  sweep->add_option("--axis", o.axis)->check(CLI::IsMember({"theta", "phi", "both"}));
  sweep->add_option("--offsets", o.offsets, "Comma-separated offsets in degrees")->delimiter(',');
  sweep->add_option("--out", o.out, "CSV, or JSON if the name ends in .json")->required();

  auto* cap = app.add_subcommand("capacity", "Embed at several depths and tabulate the results");
  cap->add_option("--model", o.model)->required();
  cap->add_option("--key", o.key)->required();
  cap->add_option("--message", o.message)->required();
  cap->add_option("--depths", o.depths)->delimiter(',');
  cap->add_option("--epochs", o.epochs);
  cap->add_option("--lr", o.lr);
  cap->add_option("--n-coarse", o.n_coarse);
  cap->add_option("--n-fine", o.n_fine);
  cap->add_option("--seed", o.seed);
  cap->add_option("--out", o.out)->required();

  std::vector<std::string> argv_store{"nerfsteg"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train_nerf(o, out);
    if (keygen->parsed()) return cmd_keygen(o, out);
    if (render->parsed()) return cmd_render(o, out);
    if (emb->parsed()) return cmd_embed(o, out);
    if (ext->parsed()) return cmd_extract(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (cap->parsed()) return cmd_capacity(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace nerfsteg::cli
