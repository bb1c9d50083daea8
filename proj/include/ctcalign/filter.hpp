#pragma once

// Confidence filtering of alignment outputs into training manifests for the
// self-training loop, plus threshold sweeps and round-to-round diffs.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctcalign/aligner.hpp"

namespace ctcalign {

enum class ConfidenceMeasure { kGamma6, kGamma };

std::string_view to_string(ConfidenceMeasure measure);
ConfidenceMeasure parse_measure(std::string_view name);

struct FilterSpec {
  double threshold = 0.5;
  ConfidenceMeasure measure = ConfidenceMeasure::kGamma6;
};

struct ManifestEntry {
  std::string letter_id;
  std::string line_id;
  std::string text;
  double gamma = 0.0;
  double gamma6 = 0.0;

  bool operator==(const ManifestEntry&) const = default;
};

struct SourceRef {
  std::string path;
  std::string sha256;
  bool operator==(const SourceRef&) const = default;
};

struct TrainingManifest {
  std::size_t iteration = 0;
  FilterSpec spec;
  std::vector<SourceRef> sources;
  std::vector<ManifestEntry> entries;
};

/// True when the line has text and its driving confidence exceeds the
/// threshold strictly.
bool keeps(const AlignedLine& line, const FilterSpec& spec);

TrainingManifest filter_alignments(std::span<const AlignmentResult> results, const FilterSpec& spec,
                                   std::vector<SourceRef> sources = {});

struct SweepRow {
  double threshold = 0.0;
  std::size_t kept = 0;
};

/// `thresholds` must be ascending.
std::vector<SweepRow> threshold_sweep(std::span<const AlignmentResult> results, std::span<const double> thresholds,
                                      ConfidenceMeasure measure = ConfidenceMeasure::kGamma6);

/// "start:stop:step" with stop exclusive, e.g. 0:1:0.1 gives ten thresholds.
std::vector<double> parse_sweep(std::string_view range);

struct EntryKey {
  std::string letter_id;
  std::string line_id;
  auto operator<=>(const EntryKey&) const = default;
};

struct ManifestDiff {
  std::vector<EntryKey> added;
  std::vector<EntryKey> removed;
  std::vector<EntryKey> modified;
};

struct IterationOutcome {
  TrainingManifest manifest;
  ManifestDiff diff;
};

ManifestDiff diff_manifests(const TrainingManifest& before, const TrainingManifest& after);

IterationOutcome iteration_step(const TrainingManifest& prior, std::span<const AlignmentResult> new_results,
                                const FilterSpec& spec, std::vector<SourceRef> sources = {});

/// Header record followed by one JSON object per entry, newline-terminated.
std::string manifest_to_jsonl(const TrainingManifest& manifest);
TrainingManifest manifest_from_jsonl(std::string_view text);

std::string sha256_hex(std::string_view bytes);

}  // namespace ctcalign
