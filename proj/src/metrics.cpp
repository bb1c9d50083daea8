#include "ctcalign/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

#include "ctcalign/error.hpp"
#include "ctcalign/utf8.hpp"

namespace ctcalign {

namespace {

std::string_view trim_trailing(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::size_t window_edits(std::u32string_view gt, std::u32string_view pred, std::size_t n) {
  auto first = [n](std::u32string_view s) { return s.substr(0, std::min(n, s.size())); };
  auto last = [n](std::u32string_view s) { return s.substr(s.size() - std::min(n, s.size())); };
  return char_edit_distance(first(gt), first(pred)) + char_edit_distance(last(gt), last(pred));
}

}  // namespace

std::size_t char_edit_distance(std::u32string_view a, std::u32string_view b) {
  return edit_distance<char32_t>(std::span<const char32_t>(a.data(), a.size()),
                                 std::span<const char32_t>(b.data(), b.size()));
}

std::vector<std::u32string> split_words(std::u32string_view text) {
  std::vector<std::u32string> words;
  std::u32string word;
  for (char32_t c : text) {
    if (utf8::is_whitespace(c)) {
      if (!word.empty()) words.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) words.push_back(std::move(word));
  return words;
}

bool lines_match(std::string_view gt, std::string_view pred) { return trim_trailing(gt) == trim_trailing(pred); }

double line_level_accuracy(std::span<const LineSet> gt, std::span<const LineSet> pred) {
  std::map<std::string_view, const LineSet*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.letter_id, &p).second) {
      throw ValidationError(fmt::format("duplicate predicted letter '{}'", p.letter_id));
    }
  }
  if (by_id.size() != gt.size()) {
    throw ValidationError(fmt::format("{} ground-truth letters but {} predicted letters", gt.size(), by_id.size()));
  }
  std::size_t matched = 0;
  std::size_t total = 0;
  for (const auto& g : gt) {
    auto it = by_id.find(g.letter_id);
    if (it == by_id.end()) throw ValidationError(fmt::format("no prediction for letter '{}'", g.letter_id));
    const auto& p = it->second->lines;
    const std::size_t common = std::min(g.lines.size(), p.size());
    for (std::size_t j = 0; j < common; ++j) matched += lines_match(g.lines[j], p[j]) ? 1 : 0;
    total += g.lines.size();
  }
  if (total == 0) throw UndefinedMetric("line-level accuracy is undefined without ground-truth lines");
  return static_cast<double>(matched) / static_cast<double>(total);
}

double cer(std::string_view gt, std::string_view pred) {
  const auto g = utf8::decode(gt);
  if (g.empty()) throw UndefinedMetric("CER is undefined for an empty ground truth");
  return static_cast<double>(char_edit_distance(g, utf8::decode(pred))) / static_cast<double>(g.size());
}

double wer(std::string_view gt, std::string_view pred) {
  const auto g = split_words(utf8::decode(gt));
  if (g.empty()) throw UndefinedMetric("WER is undefined for a ground truth without words");
  const auto p = split_words(utf8::decode(pred));
  return static_cast<double>(edit_distance<std::u32string>(g, p)) / static_cast<double>(g.size());
}

double cer_n(std::string_view gt, std::string_view pred, std::size_t n) {
  if (n == 0) throw ValidationError("CER_n needs n >= 1");
  const auto g = utf8::decode(gt);
  if (g.empty()) throw UndefinedMetric("CER_n is undefined for an empty ground truth");
  const auto p = utf8::decode(pred);
  return static_cast<double>(window_edits(g, p, n)) / static_cast<double>(2 * std::min(n, g.size()));
}

LineCounts count_line(std::string_view gt, std::string_view pred, std::size_t n) {
  const auto g = utf8::decode(gt);
  const auto p = utf8::decode(pred);
  const auto gw = split_words(g);
  const auto pw = split_words(p);
  LineCounts c;
  c.char_edits = char_edit_distance(g, p);
  c.gt_chars = g.size();
  c.word_edits = edit_distance<std::u32string>(gw, pw);
  c.gt_words = gw.size();
  c.boundary_edits = window_edits(g, p, n);
  c.boundary_chars = 2 * std::min(n, g.size());
  c.matched = lines_match(gt, pred);
  return c;
}

void MetricsCounts::add(const LineCounts& line) {
  ++gt_lines;
  matched_lines += line.matched ? 1 : 0;
  edit_ops += line.char_edits;
  gt_chars += line.gt_chars;
  word_edit_ops += line.word_edits;
  gt_words += line.gt_words;
  boundary_edit_ops += line.boundary_edits;
  boundary_chars += line.boundary_chars;
}

MetricsCounts& MetricsCounts::operator+=(const MetricsCounts& o) {
  gt_lines += o.gt_lines;
  matched_lines += o.matched_lines;
  edit_ops += o.edit_ops;
  gt_chars += o.gt_chars;
  word_edit_ops += o.word_edit_ops;
  gt_words += o.gt_words;
  boundary_edit_ops += o.boundary_edit_ops;
  boundary_chars += o.boundary_chars;
  return *this;
}

MetricsReport aggregate(const MetricsCounts& counts, std::size_t n) {
  MetricsReport r;
  r.n = n;
  r.counts = counts;
  r.line_accuracy = ratio(counts.matched_lines, counts.gt_lines);
  r.cer = ratio(counts.edit_ops, counts.gt_chars);
  r.wer = ratio(counts.word_edit_ops, counts.gt_words);
  r.cer_n = ratio(counts.boundary_edit_ops, counts.boundary_chars);
  return r;
}

MetricsCounts count_letter(const LineSet& gt, const LineSet& pred, std::size_t n) {
  MetricsCounts counts;
  for (std::size_t j = 0; j < gt.lines.size(); ++j) {
    counts.add(count_line(gt.lines[j], j < pred.lines.size() ? std::string_view(pred.lines[j]) : "", n));
  }
  return counts;
}

Evaluation evaluate(std::span<const LineSet> gt, std::span<const LineSet> pred, std::size_t n) {
  if (n == 0) throw ValidationError("CER_n needs n >= 1");
  std::map<std::string_view, const LineSet*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.letter_id, &p).second) {
      throw ValidationError(fmt::format("duplicate predicted letter '{}'", p.letter_id));
    }
  }
  if (by_id.size() != gt.size()) {
    throw ValidationError(fmt::format("{} ground-truth letters but {} predicted letters", gt.size(), by_id.size()));
  }
  Evaluation ev;
  MetricsCounts total;
  for (const auto& g : gt) {
    auto it = by_id.find(g.letter_id);
    if (it == by_id.end()) throw ValidationError(fmt::format("no prediction for letter '{}'", g.letter_id));
    const auto counts = count_letter(g, *it->second, n);
    total += counts;
    ev.letters.push_back({g.letter_id, aggregate(counts, n)});
  }
  ev.corpus = aggregate(total, n);
  return ev;
}

std::vector<ConfidenceBucket> confidence_buckets(std::span<const ScoredLine> lines, std::size_t buckets) {
  if (buckets == 0) throw ValidationError("need at least one confidence bucket");
  std::vector<ConfidenceBucket> out(buckets);
  std::vector<std::size_t> matched(buckets, 0);
  for (std::size_t b = 0; b < buckets; ++b) {
    out[b].low = static_cast<double>(b) / static_cast<double>(buckets);
    out[b].high = static_cast<double>(b + 1) / static_cast<double>(buckets);
  }
  for (const auto& line : lines) {
    const double c = std::clamp(line.confidence, 0.0, 1.0);
    const auto b = std::min(buckets - 1, static_cast<std::size_t>(c * static_cast<double>(buckets)));
    ++out[b].count;
    matched[b] += line.matched ? 1 : 0;
  }
  for (std::size_t b = 0; b < buckets; ++b) out[b].line_accuracy = ratio(matched[b], out[b].count);
  return out;
}

}  // namespace ctcalign
