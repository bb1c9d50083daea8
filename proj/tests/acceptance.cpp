// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include "ctcalign/aligner.hpp"
#include "ctcalign/filter.hpp"
#include "ctcalign/metrics.hpp"
#include "ctcalign/parallel.hpp"
#include "ctcalign/serialize.hpp"
#include "ctcalign/synth.hpp"
#include "ctcalign/utf8.hpp"

using namespace ctcalign;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  if (!o.pass) ++failures;
  fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
  std::fflush(stdout);
}

const std::vector<std::string> kWords{
    "Bullinger", "schreibt", "an", "Vadian", "und", "grüßt", "die", "Brüder", "in", "Zürich", "am", "Tag", "nach",
    "Martini", "1541", "ex", "status", "sit", "illis", "gratia", "Domini", "nostri", "vobis", "cum", "omnibus",
    "fratribus", "salutem", "plurimam", "dicit", "Christus", "ecclesia", "literas", "tuas", "accepi", "heri",
    "Vale", "(Basel)", "scripsi;", "pro", "stipendio", "misso", "Gott", "behüt", "Euch", "allezeit."};

std::string random_words(Prng& rng, std::size_t max_chars) {
  std::string text;
  for (;;) {
    const auto& w = kWords[rng.below(kWords.size())];
    const std::size_t len = utf8::decode(text).size() + (text.empty() ? 0 : 1) + utf8::decode(w).size();
    if (len > max_chars) break;
    text += (text.empty() ? "" : " ") + w;
  }
  return text;
}

// A letter broken into lines of at most `width` characters; some breaks fall
// inside a word and some lines are blank.
SynthSpec letter_with_splits(Prng& rng, std::size_t max_lines, std::size_t width, double gap_rate) {
  std::u32string text;
  const std::size_t target = (1 + rng.below(max_lines)) * (width - 10);
  while (text.size() < target) {
    if (!text.empty()) text += U' ';
    text += utf8::decode(kWords[rng.below(kWords.size())]);
  }
  SynthSpec spec;
  std::size_t pos = 0;
  while (pos < text.size() && spec.lines.size() < max_lines) {
    if (!spec.lines.empty() && rng.uniform() < gap_rate) {
      spec.lines.emplace_back();
      continue;
    }
    std::size_t end = std::min(pos + width, text.size());
    std::size_t next = end;
    if (spec.lines.size() + 1 == max_lines) {
      text.resize(end);
      while (!text.empty() && text.back() == U' ') text.pop_back();
      end = next = text.size();
    } else if (end < text.size()) {
      const auto space = text.rfind(U' ', end);
      if (space == std::u32string::npos || space <= pos) {
        next = end;
      } else {
        const std::size_t word = space + 1;
        if (word < end && end - word >= 4 && rng.uniform() < 0.3) {
          end = next = word + 2 + rng.below(end - word - 3);
        } else {
          end = space;
          next = space + 1;
        }
      }
    }
    spec.lines.push_back(utf8::encode(text.substr(pos, end - pos)));
    pos = next;
  }
  spec.transcription = utf8::encode(text);
  return spec;
}

double line_accuracy_of(const SynthSpec& spec, const AlignmentResult& r) {
  const std::vector<LineSet> gt{{spec.letter_id, spec.lines}};
  const std::vector<LineSet> pred{to_line_set(r)};
  return line_level_accuracy(gt, pred);
}

AlignmentResult align_spec(const SynthSpec& spec, const Alphabet& alphabet) {
  return align_bundle(generate_posteriors(spec, alphabet), Transcription{synth_transcription(spec)}, alphabet);
}

// ------------------------------------------------------------------ criteria

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  Prng rng(20240601);
  std::size_t unique = 0, mismatched_prob = 0, mismatched_path = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = random_instance(rng, 10, 14);
    const auto fsa = build_fsa(inst.transcription, inst.alphabet);
    const auto fast = align_letter(inst.sequence, fsa);
    const auto slow = brute_force_align(inst.sequence, fsa);
    const double diff = std::abs(fast.total_log_prob - slow.log_prob);
    worst = std::max(worst, diff);
    if (diff > 1e-9) ++mismatched_prob;
    std::size_t optima = 0;
    for (const auto& p : enumerate_paths(fsa, inst.sequence.steps)) {
      if (std::abs(path_log_prob(inst.sequence, fsa, p) - slow.log_prob) <= 1e-12) ++optima;
    }
    if (optima == 1) {
      ++unique;
      if (fast.path.states != slow.states) ++mismatched_path;
    }
  }
  const double elapsed = seconds_since(start);
  return {mismatched_prob == 0 && mismatched_path == 0 && elapsed < 30.0,
          fmt::format("1000 instances, max |dlogp| {:.2e}, {} unique optima with {} path mismatches, {:.2f} s", worst,
                      unique, mismatched_path, elapsed)};
}

Outcome compression_correctness() {
  Prng rng(77);
  std::size_t bad_sum = 0, bad_partition = 0, crossing = 0, steps = 0;
  for (int b = 0; b < 200; ++b) {
    const std::size_t cols = 2 + rng.below(8);
    std::vector<PosteriorMatrix> lines;
    const std::size_t count = 1 + rng.below(5);
    for (std::size_t k = 0; k < count; ++k) lines.push_back(random_matrix(rng, 1 + rng.below(60), cols));
    const auto bundle = concatenate(std::move(lines), "b");
    const double theta = 0.9 + 0.099 * rng.uniform();
    const auto seq = epsilon_compress(bundle, theta);
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < seq.steps; ++j) {
      const auto span = seq.origin_spans[j];
      if (span.begin != cursor || span.end <= span.begin) ++bad_partition;
      cursor = span.end;
      const std::size_t line = seq.line_of_step[j];
      const std::size_t line_start = line == 0 ? 0 : bundle.boundaries[line - 1];
      if (span.begin < line_start || span.end > bundle.boundaries[line]) ++crossing;
      for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        for (std::size_t t = span.begin; t < span.end; ++t) {
          const std::size_t l = static_cast<std::size_t>(
              std::upper_bound(bundle.boundaries.begin(), bundle.boundaries.end(), t) - bundle.boundaries.begin());
          const std::size_t offset = l == 0 ? 0 : bundle.boundaries[l - 1];
          sum += std::log(static_cast<double>(bundle.lines[l].probs[(t - offset) * cols + c]));
        }
        const double got = seq.log_prob(j, c);
        const bool same = (std::isinf(sum) && std::isinf(got) && sum < 0 && got < 0) || std::abs(sum - got) <= 1e-9;
        if (!same) ++bad_sum;
      }
      ++steps;
    }
    if (cursor != bundle.boundaries.back()) ++bad_partition;
  }
  return {bad_sum == 0 && bad_partition == 0 && crossing == 0,
          fmt::format("200 bundles, {} compressed steps, {} sum errors, {} partition errors, {} boundary crossings",
                      steps, bad_sum, bad_partition, crossing)};
}

// CTC-like line: one or two peaked rows per character, blank rows between
// them. Blank confidence varies so only part of the blank rows clear 0.99.
PosteriorMatrix ctc_like_line(Prng& rng, const Alphabet& alphabet, std::size_t steps, std::string id) {
  const auto text = utf8::decode(random_words(rng, 60));
  std::vector<std::size_t> targets;
  std::size_t char_rows = 0;
  std::vector<std::size_t> per_char;
  for (std::size_t i = 0; i < text.size(); ++i) {
    per_char.push_back(1 + (rng.uniform() < 0.3 ? 1 : 0));
    char_rows += per_char.back();
  }
  const std::size_t blanks = steps - char_rows;
  std::vector<std::size_t> gaps(text.size() + 1, 0);
  for (std::size_t b = 0; b < blanks; ++b) gaps[rng.below(gaps.size())]++;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    targets.insert(targets.end(), gaps[i], Alphabet::kEpsilon);
    if (i < text.size()) targets.insert(targets.end(), per_char[i], *alphabet.index_of(text[i]));
  }
  PosteriorMatrix m;
  m.line_id = std::move(id);
  m.steps = steps;
  m.cols = alphabet.size();
  m.probs.resize(steps * m.cols);
  for (std::size_t t = 0; t < steps; ++t) {
    const double noise = std::pow(10.0, -1.0 - 3.0 * rng.uniform());
    std::vector<double> row(m.cols);
    double total = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c == targets[t]) continue;
      row[c] = rng.exponential();
      total += row[c];
    }
    for (std::size_t c = 0; c < m.cols; ++c) {
      row[c] = c == targets[t] ? 1.0 - noise : noise * row[c] / total;
      m.probs[t * m.cols + c] = static_cast<float>(row[c]);
    }
  }
  return m;
}

Outcome compression_ratio() {
  Prng rng(1234);
  const auto alphabet = latin_alphabet();
  std::vector<LetterBundle> letters;
  for (int l = 0; l < 20; ++l) {
    std::vector<PosteriorMatrix> lines;
    for (int k = 0; k < 25; ++k) lines.push_back(ctc_like_line(rng, alphabet, 256, fmt::format("l{}", k)));
    letters.push_back(concatenate(std::move(lines), fmt::format("L{}", l)));
  }
  std::size_t raw = 0, compressed = 0;
  for (const auto& letter : letters) {
    const auto stats = compression_stats(letter, epsilon_compress(letter, 0.99));
    raw += stats.raw_letter_steps;
    compressed += stats.compressed_letter_steps;
  }
  const double ratio = static_cast<double>(raw) / static_cast<double>(compressed);
  return {ratio >= 1.2 && ratio <= 2.5,
          fmt::format("256 steps/line, theta 0.99: {} -> {} steps per letter, ratio {:.3f} (bracket [1.2, 2.5])",
                      raw / letters.size(), compressed / letters.size(), ratio)};
}

Outcome round_trip() {
  const auto alphabet = latin_alphabet();
  std::size_t letters = 0, lines = 0, gaps = 0, splits = 0, wrong = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Prng rng(seed);
    auto spec = letter_with_splits(rng, 40, 80, 0.05);
    spec.letter_id = fmt::format("rt{}", seed);
    spec.steps_per_char = 1 + rng.below(3);
    spec.epsilon_run = 1 + rng.below(2);
    const auto r = align_spec(spec, alphabet);
    ++letters;
    bool ok = line_accuracy_of(spec, r) == 1.0 && r.lines.size() == spec.lines.size();
    for (std::size_t k = 0; k < r.lines.size(); ++k) {
      ++lines;
      if (spec.lines[k].empty()) {
        ++gaps;
        continue;
      }
      if (r.lines[k].gamma != 1.0) ok = false;
    }
    const auto emitted = emitted_line_texts(spec);
    for (std::size_t k = 0; k + 1 < spec.lines.size(); ++k) {
      if (!spec.lines[k].empty() && emitted[k] == utf8::decode(spec.lines[k])) ++splits;
    }
    if (!ok) ++wrong;
  }

  // PyLaia-scale timing: 35 lines of about 214 steps over 79 symbols.
  Prng rng(99);
  SynthSpec big;
  big.letter_id = "pylaia";
  for (int k = 0; k < 35; ++k) big.lines.push_back(random_words(rng, 71));
  big.steps_per_char = 2;
  big.noise = 0.05;
  big.seed = 3;
  const auto bundle = generate_posteriors(big, alphabet);
  const auto start = Clock::now();
  const auto r = align_bundle(bundle, Transcription{synth_transcription(big)}, alphabet);
  const double elapsed = seconds_since(start);
  const double avg_steps = static_cast<double>(bundle.boundaries.back()) / 35.0;
  const bool timing_ok = elapsed <= 10.0 && line_accuracy_of(big, r) == 1.0;

  return {wrong == 0 && splits > 0 && gaps > 0 && timing_ok,
          fmt::format("{} letters, {} lines ({} gaps, {} mid-word splits), {} failures; 35 x {:.0f} steps x {} symbols "
                      "aligned in {:.3f} s",
                      letters, lines, gaps, splits, wrong, avg_steps, alphabet.size(), elapsed)};
}

template <typename T>
std::size_t table_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

Outcome metric_fidelity() {
  Prng rng(4242);
  const std::vector<std::string> pool{"a", "b", "e", " ", "ü", "ß", "x", "  ", "é"};
  auto random_string = [&](std::size_t max_len) {
    std::string s;
    const std::size_t n = rng.below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) s += pool[rng.below(pool.size())];
    return s;
  };
  auto window = [](const std::u32string& s, std::size_t n, bool head) {
    const std::size_t k = std::min(n, s.size());
    return head ? std::vector<char32_t>(s.begin(), s.begin() + k) : std::vector<char32_t>(s.end() - k, s.end());
  };
  std::size_t disagreements = 0, pairs = 0;
  while (pairs < 500) {
    const auto gt = random_string(20);
    const auto pred = random_string(20);
    const auto g = utf8::decode(gt);
    if (g.empty()) continue;
    ++pairs;
    const auto p = utf8::decode(pred);
    const std::vector<char32_t> gv(g.begin(), g.end()), pv(p.begin(), p.end());
    if (cer(gt, pred) != static_cast<double>(table_distance(gv, pv)) / g.size()) ++disagreements;
    const auto gw = split_words(g);
    const auto pw = split_words(p);
    if (!gw.empty() && wer(gt, pred) != static_cast<double>(table_distance(gw, pw)) / gw.size()) ++disagreements;
    const std::size_t n = 1 + rng.below(8);
    const std::size_t edits = table_distance(window(g, n, true), window(p, n, true)) +
                              table_distance(window(g, n, false), window(p, n, false));
    if (cer_n(gt, pred, n) != static_cast<double>(edits) / (2 * std::min(n, g.size()))) ++disagreements;
  }
  const std::vector<LineSet> gt{{"L", {"one", "two", "three", "four"}}};
  const std::vector<LineSet> third{{"L", {"one", "two", "thre", "four"}}};
  const std::vector<LineSet> two{{"L", {"one", "two"}}};
  const double a = line_level_accuracy(gt, third);
  const double b = line_level_accuracy(gt, two);
  return {disagreements == 0 && a == 0.75 && b == 0.5,
          fmt::format("500 pairs, {} disagreements; worked fixtures give {} and {}", disagreements, a, b)};
}

struct NoisyCorpus {
  std::vector<SynthSpec> specs;
  std::vector<AlignmentResult> results;
};

// Letters whose noise ranges from clean to nearly uninformative.
NoisyCorpus noisy_corpus(std::uint64_t seed, std::size_t workers) {
  Prng rng(seed);
  NoisyCorpus corpus;
  for (int l = 0; l < 6; ++l) {
    SynthSpec spec;
    spec.letter_id = fmt::format("s{}_l{}", seed, l);
    const std::size_t count = 3 + rng.below(6);
    for (std::size_t k = 0; k < count; ++k) spec.lines.push_back(random_words(rng, 8 + rng.below(40)));
    spec.noise = 0.995 * std::sqrt(rng.uniform());
    spec.steps_per_char = 1 + rng.below(2);
    spec.seed = seed * 100 + l;
    corpus.specs.push_back(std::move(spec));
  }
  const auto alphabet = latin_alphabet();
  corpus.results = parallel_map<AlignmentResult>(corpus.specs.size(), workers, [&](std::size_t i) {
    auto r = align_spec(corpus.specs[i], alphabet);
    r.runtime_seconds = 0.0;
    return r;
  });
  return corpus;
}

Outcome confidence_behavior() {
  std::vector<double> thresholds;
  for (int i = 0; i < 10; ++i) thresholds.push_back(i / 10.0);
  std::vector<std::size_t> kept(thresholds.size()), matched(thresholds.size());
  std::size_t short_lines = 0, short_nonzero = 0;
  const int seeds = 60;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto corpus = noisy_corpus(seed, 1);
    for (std::size_t l = 0; l < corpus.specs.size(); ++l) {
      for (std::size_t k = 0; k < corpus.results[l].lines.size(); ++k) {
        const auto& line = corpus.results[l].lines[k];
        if (utf8::decode(line.text).size() < 12) {
          ++short_lines;
          if (line.gamma6 != 0.0) ++short_nonzero;
        }
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
          if (!keeps(line, {thresholds[i], ConfidenceMeasure::kGamma6})) continue;
          ++kept[i];
          if (lines_match(corpus.specs[l].lines[k], line.text)) ++matched[i];
        }
      }
    }
  }
  bool monotone = true;
  std::string curve;
  double previous = -1.0;
  double first = -1.0;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (kept[i] == 0) {
      monotone = false;
      curve += fmt::format(" {:.1f}:empty", thresholds[i]);
      continue;
    }
    const double acc = static_cast<double>(matched[i]) / static_cast<double>(kept[i]);
    if (acc < previous) monotone = false;
    if (first < 0.0) first = acc;
    previous = acc;
    curve += fmt::format(" {:.1f}:{:.3f}/{}", thresholds[i], acc, kept[i]);
  }
  // A flat curve would mean the corpus never misaligns and proves nothing.
  const bool informative = first >= 0.0 && first < previous;
  return {short_nonzero == 0 && short_lines > 0 && monotone && informative,
          fmt::format("{} lines under 12 chars, {} with gamma6 != 0; {} seeds, accuracy/kept by threshold:{}",
                      short_lines, short_nonzero, seeds, curve)};
}

Outcome filtering_determinism() {
  const auto thresholds = parse_sweep("0:1:0.05");
  bool sweep_ok = true, identical = true;
  for (int seed = 0; seed < 10; ++seed) {
    const auto serial = noisy_corpus(1000 + seed, 1);
    const auto parallel = noisy_corpus(1000 + seed, 4);
    const auto rows = threshold_sweep(serial.results, thresholds);
    for (std::size_t i = 1; i < rows.size(); ++i) sweep_ok = sweep_ok && rows[i].kept <= rows[i - 1].kept;
    const FilterSpec spec{0.5, ConfidenceMeasure::kGamma6};
    const auto a = manifest_to_jsonl(filter_alignments(serial.results, spec));
    const auto b = manifest_to_jsonl(filter_alignments(serial.results, spec));
    const auto c = manifest_to_jsonl(filter_alignments(parallel.results, spec));
    std::string json_a, json_c;
    for (const auto& r : serial.results) json_a += dump(to_json(r));
    for (const auto& r : parallel.results) json_c += dump(to_json(r));
    identical = identical && a == b && a == c && json_a == json_c;
  }
  return {sweep_ok && identical,
          fmt::format("10 corpora: sweep non-increasing {}, manifests and alignments identical for 1 and 4 workers {}",
                      sweep_ok, identical)};
}

}  // namespace

int main() {
  report("oracle-equivalence", oracle_equivalence);
  report("compression-correctness", compression_correctness);
  report("compression-ratio", compression_ratio);
  report("round-trip", round_trip);
  report("metric-fidelity", metric_fidelity);
  report("confidence-behavior", confidence_behavior);
  report("filtering-determinism", filtering_determinism);
  fmt::print("EXCLUDED neural-results: recognizer training and corpus-level error rates need trained models\n");
  return failures == 0 ? 0 : 1;
}
