#pragma once

// Sender/receiver protocol around a radiance field and a backdoored
// extractor, plus the attacker-style viewpoint evaluation.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nerfsteg/message_codec.hpp"
#include "nerfsteg/message_extractor.hpp"
#include "nerfsteg/radiance_field.hpp"

namespace nerfsteg {

/// Produces the image seen from a viewpoint.
using ViewRenderer = std::function<Tensor(const ViewKey&)>;

/// Everything a receiver needs besides the key. Deliberately has no
/// viewpoint fields.
struct Manifest {
  std::size_t depth = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_coarse = 64;
  std::size_t n_fine = 64;
  Color background{1.0f, 1.0f, 1.0f};
  std::uint64_t render_seed = 0;
  std::string field_digest;
  std::string created_by = "nerfsteg";
};

struct StegoBundle {
  FieldParams field;
  ExtractorParams extractor;
  Manifest manifest;
};

/// Render settings used for secret and probe views: midpoint samples, so a
/// render is a pure function of the field and the viewpoint.
RenderSettings stego_render_settings(const Manifest& manifest);

/// Renders through the bundle's field at the bundle's image size.
ViewRenderer field_renderer(const FieldParams& field, const Manifest& manifest);

/// Hex FNV-1a digest over every field tensor; binds an extractor to its field.
std::string field_digest(const FieldParams& field);

struct EmbedOptions {
  std::size_t depth = 1;
  std::size_t max_epochs = 2000;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  ExtractorInit init = ExtractorInit::fan_in_uniform;
  double output_gain = 0.1;
  std::size_t n_coarse = 64;
  std::size_t n_fine = 64;
  std::function<void(std::size_t epoch, double loss, double acc)> on_epoch;
};

struct EmbedReport {
  std::size_t epochs_to_full = 0;
  double wall_time_s = 0.0;
  std::vector<EpochStats> trace;
};

/// The extractor did not reach full accuracy within the epoch budget.
struct EmbedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackdoorResult {
  ExtractorParams extractor;
  BitPlanes planes;
  EmbedReport report;
};

/// Renders the secret view, frames the message and overfits an extractor.
BackdoorResult train_backdoor(const ViewRenderer& render, const ViewKey& key, std::span<const std::uint8_t> message,
                              const EmbedOptions& options);

struct EmbedResult {
  StegoBundle bundle;
  EmbedReport report;
};

EmbedResult embed(const FieldParams& field, const ViewKey& key, std::span<const std::uint8_t> message,
                  const EmbedOptions& options);

/// Receiver side. Throws CorruptionError when the key is wrong enough to
/// break the length header.
Bytes extract_message(const ViewRenderer& render, const ExtractorParams& extractor, const ViewKey& key);
Bytes extract_message(const StegoBundle& bundle, const ViewKey& key);

enum class SweepAxis { theta, phi, both };

SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

struct SweepRow {
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  double offset_deg = 0.0;
  double acc = 0.0;
  double rs_bpp = 0.0;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::theta;
  std::size_t depth = 1;
  std::vector<SweepRow> rows;

  /// Header theta_deg,phi_deg,offset_deg,acc,rs_bpp; values round-trip exactly.
  std::string to_csv() const;
  std::string to_json() const;
};

/// 0, 0.1, 0.5, 1, 2, 5, 10, 30, 60, 90 degrees.
std::vector<double> default_sweep_offsets();

/// Applies each offset to the chosen axis, renders, extracts and scores the
/// raw planes against `truth`. Rows are sorted by offset.
SweepReport attacker_sweep(const ViewRenderer& render, const ExtractorParams& extractor, const BitPlanes& truth,
                           const ViewKey& true_key, SweepAxis axis, std::vector<double> offsets);
SweepReport attacker_sweep(const StegoBundle& bundle, const BitPlanes& truth, const ViewKey& true_key,
                           SweepAxis axis, std::vector<double> offsets);

/// Theta offsets of +-5, 10, 20, 45 and 90 degrees crossed with phi offsets
/// of 0 and +-10 degrees (30 views).
std::vector<ViewKey> offkey_views(const ViewKey& key);

struct OffKeyStats {
  std::vector<double> accuracies;
  double mean_acc = 0.0;
  double max_acc = 0.0;
  double mean_rs_bpp = 0.0;
};

OffKeyStats evaluate_offkey(const ViewRenderer& render, const ExtractorParams& extractor, const BitPlanes& truth,
                            const ViewKey& key);

struct CapacityRow {
  std::size_t depth = 0;
  std::size_t epochs_to_full = 0;
  double wall_time_s = 0.0;
  double secret_acc = 0.0;
  double offkey_mean_acc = 0.0;
  double offkey_mean_rs_bpp = 0.0;
};

std::vector<CapacityRow> capacity_evaluation(const ViewRenderer& render, const ViewKey& key,
                                             std::span<const std::uint8_t> message,
                                             const std::vector<std::size_t>& depths, const EmbedOptions& options);

std::string capacity_csv(const std::vector<CapacityRow>& rows);

}  // namespace nerfsteg
