#pragma once

// Alphabet and posterior-matrix data model, file I/O, letter concatenation
// and epsilon compression.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctcalign {

/// Ordered symbol set. Index 0 is always the blank (epsilon); its stored
/// code point is meaningless and never matches a transcription character.
class Alphabet {
 public:
  static constexpr std::size_t kEpsilon = 0;
  static constexpr std::string_view kEpsilonToken = "<eps>";
  static constexpr std::string_view kSpaceToken = "<space>";

  /// `symbols` excludes epsilon; it is prepended at index 0.
  explicit Alphabet(std::vector<char32_t> symbols);

  std::size_t size() const { return symbols_.size(); }
  std::size_t epsilon_index() const { return kEpsilon; }
  char32_t symbol(std::size_t index) const { return symbols_.at(index); }
  std::optional<std::size_t> index_of(char32_t c) const;

  /// One token per line, in the alphabet file format.
  std::string to_text() const;

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
};

Alphabet parse_alphabet(std::string_view text);
Alphabet load_alphabet(const std::filesystem::path& path);
void save_alphabet(const Alphabet& alphabet, const std::filesystem::path& path);

constexpr double kRowSumTolerance = 1e-4;

/// T x |A| grid, row = time step, column = alphabet index.
struct PosteriorMatrix {
  std::string line_id;
  std::size_t steps = 0;
  std::size_t cols = 0;
  std::vector<float> probs;

  std::span<const float> row(std::size_t t) const { return {probs.data() + t * cols, cols}; }
  float at(std::size_t t, std::size_t c) const { return probs[t * cols + c]; }
};

/// Finite, in [0,1], rows summing to 1 within kRowSumTolerance.
void validate_matrix(const PosteriorMatrix& matrix);

// Binary "CTCP" container, little-endian, version 1.
PosteriorMatrix decode_matrix(std::span<const std::uint8_t> bytes, std::string line_id = {});
std::vector<std::uint8_t> encode_matrix(const PosteriorMatrix& matrix);

/// Reads, checks the column count against `alphabet` and validates.
PosteriorMatrix load_matrix(const std::filesystem::path& path, const Alphabet& alphabet,
                            std::string line_id = {});
void save_matrix(const PosteriorMatrix& matrix, const std::filesystem::path& path);

struct LetterBundle {
  std::string letter_id;
  std::vector<PosteriorMatrix> lines;
  /// Cumulative end offset of each line on the concatenated time axis.
  std::vector<std::size_t> boundaries;

  std::size_t cols() const { return lines.empty() ? 0 : lines.front().cols; }
  std::size_t total_steps() const { return boundaries.empty() ? 0 : boundaries.back(); }
};

LetterBundle concatenate(std::vector<PosteriorMatrix> lines, std::string letter_id = {});

struct LineRef {
  std::string line_id;
  std::filesystem::path matrix;
};

struct LetterManifest {
  std::string letter_id;
  std::filesystem::path alphabet;
  std::vector<LineRef> lines;
};

/// Relative paths inside the manifest are resolved against its directory.
LetterManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const LetterManifest& manifest, const std::filesystem::path& path);

struct LoadedLetter {
  Alphabet alphabet;
  LetterBundle bundle;
};

LoadedLetter load_letter(const std::filesystem::path& manifest_path);

struct StepSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  bool operator==(const StepSpan&) const = default;
};

/// Epsilon-compressed letter sequence, stored as natural logs.
/// A probability of exactly zero is -infinity.
struct CompressedSequence {
  std::size_t steps = 0;
  std::size_t cols = 0;
  std::size_t raw_steps = 0;
  std::vector<double> log_probs;
  std::vector<StepSpan> origin_spans;
  std::vector<std::size_t> line_of_step;
  double compression_ratio = 1.0;

  std::span<const double> log_row(std::size_t t) const {
    return {log_probs.data() + t * cols, cols};
  }
  double log_prob(std::size_t t, std::size_t c) const { return log_probs[t * cols + c]; }

  /// Compressed-step range covered by line `k`.
  StepSpan line_span(std::size_t k) const;
  std::size_t line_count() const { return line_of_step.empty() ? 0 : line_of_step.back() + 1; }
};

constexpr double kDefaultTheta = 0.99;

/// Maximal runs of steps with P(eps) > theta inside one line collapse into a
/// single step holding the per-symbol product over the run.
CompressedSequence epsilon_compress(const LetterBundle& bundle, double theta = kDefaultTheta);

/// Wraps a precomputed log grid (one line) as a compressed sequence with
/// identity spans. Used by tests and oracles.
CompressedSequence uncompressed_sequence(std::vector<double> log_probs, std::size_t cols,
                                         std::vector<std::size_t> line_of_step = {});

struct CompressionStats {
  double avg_line_steps = 0.0;
  std::size_t raw_letter_steps = 0;
  std::size_t compressed_letter_steps = 0;
  double ratio = 1.0;
};

CompressionStats compression_stats(const LetterBundle& bundle, const CompressedSequence& compressed);

}  // namespace ctcalign
