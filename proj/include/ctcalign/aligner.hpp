#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctcalign/fsa.hpp"
#include "ctcalign/posteriors.hpp"

namespace ctcalign {

/// Optimal state sequence over the compressed steps.
struct PathSolution {
  std::vector<StateId> states;
  double log_prob = 0.0;
  /// log P(c*_j | t_j); kept alongside the linear values because compressed
  /// steps can underflow in linear space.
  std::vector<double> step_log_prob;
  std::vector<double> per_step_prob;
};

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive, indexes into the transcription
  bool operator==(const CharSpan&) const = default;
};

struct AlignedLine {
  std::string line_id;
  std::string text;  // UTF-8, empty for a gap line
  std::size_t start_step = 0;
  std::size_t end_step = 0;  // exclusive, compressed steps
  double gamma = 0.0;
  double gamma6 = 0.0;
  /// Transcription characters assigned to the line, including consumed
  /// boundary whitespace.
  CharSpan char_span;
};

struct AlignmentResult {
  std::string letter_id;
  std::vector<AlignedLine> lines;
  double total_log_prob = 0.0;
  double runtime_seconds = 0.0;
  PathSolution path;
};

struct DecodeStats {
  std::size_t columns = 0;
  std::size_t peak_live_records = 0;
  std::size_t records_created = 0;
};

/// Token-passing Viterbi over the automaton. Only the current column of
/// tokens is held; each token owns a shared chain of state-entry records.
/// Ties prefer the self-loop, then the epsilon predecessor, then the skip
/// arc; between the two final states the epsilon state wins a tie.
PathSolution decode_best_path(const CompressedSequence& sequence, const TranscriptionFsa& fsa,
                              DecodeStats* stats = nullptr);

struct LineConfidence {
  double gamma = 0.0;
  double gamma6 = 0.0;
};

constexpr std::size_t kBoundaryWindow = 6;
constexpr std::size_t kMinBoundaryChars = 2 * kBoundaryWindow;

/// gamma: mean step probability. gamma6: mean of the first six and last six
/// step probabilities, zero when the line text or the span is shorter than
/// twelve.
LineConfidence line_confidences(std::span<const double> step_probs, std::size_t text_length);

std::vector<AlignedLine> insert_newlines(const PathSolution& path, const CompressedSequence& sequence,
                                         const TranscriptionFsa& fsa, std::span<const std::string> line_ids = {});

AlignmentResult align_letter(const CompressedSequence& sequence, const TranscriptionFsa& fsa,
                             std::span<const std::string> line_ids = {}, std::string letter_id = {});

/// Convenience wrapper: compress, build the automaton and align.
AlignmentResult align_bundle(const LetterBundle& bundle, const Transcription& transcription,
                             const Alphabet& alphabet, double theta = kDefaultTheta);

}  // namespace ctcalign
