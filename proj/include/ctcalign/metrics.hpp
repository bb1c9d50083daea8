#pragma once

// Line-level accuracy, CER, WER and boundary CER over index-matched lines.
// Edit distances count Unicode scalar values; normalization is by the
// ground truth. Corpus figures are micro-averaged.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctcalign {

struct LineSet {
  std::string letter_id;
  std::vector<std::string> lines;  // UTF-8, reading order
};

template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t char_edit_distance(std::u32string_view a, std::u32string_view b);
std::vector<std::u32string> split_words(std::u32string_view text);

/// Exact equality after trimming trailing whitespace.
bool lines_match(std::string_view gt, std::string_view pred);

/// Matched ground-truth lines over all ground-truth lines, letters paired by
/// letter_id. Throws ValidationError on mismatched letter sets.
double line_level_accuracy(std::span<const LineSet> gt, std::span<const LineSet> pred);

double cer(std::string_view gt, std::string_view pred);
double wer(std::string_view gt, std::string_view pred);
double cer_n(std::string_view gt, std::string_view pred, std::size_t n);

/// Raw counts for one ground-truth/prediction line pair.
struct LineCounts {
  std::size_t char_edits = 0;
  std::size_t gt_chars = 0;
  std::size_t word_edits = 0;
  std::size_t gt_words = 0;
  std::size_t boundary_edits = 0;
  std::size_t boundary_chars = 0;
  bool matched = false;
};

LineCounts count_line(std::string_view gt, std::string_view pred, std::size_t n);

struct MetricsCounts {
  std::size_t gt_lines = 0;
  std::size_t matched_lines = 0;
  std::size_t edit_ops = 0;
  std::size_t gt_chars = 0;
  std::size_t word_edit_ops = 0;
  std::size_t gt_words = 0;
  std::size_t boundary_edit_ops = 0;
  std::size_t boundary_chars = 0;

  void add(const LineCounts& line);
  MetricsCounts& operator+=(const MetricsCounts& other);
};

/// Undefined metrics (zero denominators) are empty.
struct MetricsReport {
  std::optional<double> line_accuracy;
  std::optional<double> cer;
  std::optional<double> wer;
  std::optional<double> cer_n;
  std::size_t n = 6;
  MetricsCounts counts;
};

MetricsReport aggregate(const MetricsCounts& counts, std::size_t n);

/// Counts every ground-truth line of one letter against the prediction at the
/// same index; a missing prediction is scored as an empty line.
MetricsCounts count_letter(const LineSet& gt, const LineSet& pred, std::size_t n);

struct LetterMetrics {
  std::string letter_id;
  MetricsReport report;
};

struct Evaluation {
  MetricsReport corpus;
  std::vector<LetterMetrics> letters;
};

Evaluation evaluate(std::span<const LineSet> gt, std::span<const LineSet> pred, std::size_t n);

struct ConfidenceBucket {
  double low = 0.0;
  double high = 0.0;
  std::optional<double> line_accuracy;
  std::size_t count = 0;
};

/// A scored predicted line for the confidence/accuracy curve.
struct ScoredLine {
  double confidence = 0.0;
  bool matched = false;
};

/// `buckets` equal-width bins over [0,1]; the last bin includes 1.0.
std::vector<ConfidenceBucket> confidence_buckets(std::span<const ScoredLine> lines, std::size_t buckets);

}  // namespace ctcalign
