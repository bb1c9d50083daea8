#include "ctcalign/aligner.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>

#include "ctcalign/error.hpp"
#include "ctcalign/utf8.hpp"

namespace ctcalign {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Refcounted arena of (step, state) entry records. A record is referenced by
// the tokens sitting on it and by records chained after it.
class RecordPool {
 public:
  static constexpr std::uint32_t kNull = std::numeric_limits<std::uint32_t>::max();

  struct Record {
    std::uint32_t step;
    std::uint32_t state;
    std::uint32_t parent;
    std::uint32_t refs;
  };

  std::uint32_t make(std::size_t step, StateId state, std::uint32_t parent) {
    std::uint32_t id;
    if (free_ != kNull) {
      id = free_;
      free_ = records_[id].parent;
    } else {
      id = static_cast<std::uint32_t>(records_.size());
      records_.emplace_back();
    }
    if (parent != kNull) ++records_[parent].refs;
    records_[id] = {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(state), parent, 1};
    ++live_;
    ++created_;
    peak_ = std::max(peak_, live_);
    return id;
  }

  void retain(std::uint32_t id) {
    if (id != kNull) ++records_[id].refs;
  }

  void release(std::uint32_t id) {
    while (id != kNull && --records_[id].refs == 0) {
      const std::uint32_t parent = records_[id].parent;
      records_[id].parent = free_;
      free_ = id;
      --live_;
      id = parent;
    }
  }

  const Record& operator[](std::uint32_t id) const { return records_[id]; }
  std::size_t peak() const { return peak_; }
  std::size_t created() const { return created_; }

 private:
  std::vector<Record> records_;
  std::uint32_t free_ = kNull;
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
  std::size_t created_ = 0;
};

struct Token {
  double score = kNegInf;
  std::uint32_t chain = RecordPool::kNull;
};

bool all_dead(const std::vector<Token>& column) {
  for (const auto& tok : column) {
    if (tok.score != kNegInf) return false;
  }
  return true;
}

}  // namespace

PathSolution decode_best_path(const CompressedSequence& seq, const TranscriptionFsa& fsa, DecodeStats* stats) {
  const std::size_t T = seq.steps;
  const std::size_t S = fsa.state_count();
  if (T == 0) throw ValidationError("cannot align an empty sequence");
  if (T < fsa.min_path_length()) throw AlignmentInfeasible(T, fsa.min_path_length());
  if (T > std::numeric_limits<std::uint32_t>::max() || S > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("sequence or automaton too large");
  }
  for (StateId s = 0; s < S; ++s) {
    if (fsa.state(s).symbol >= seq.cols) {
      throw ValidationError(fmt::format("automaton symbol {} outside the {}-column matrix", fsa.state(s).symbol, seq.cols));
    }
  }

  // A state is worth a token at step t only if it is reachable from an
  // initial state in t+1 steps and can still reach a final state in time.
  auto viable = [&](StateId s, std::size_t t) {
    return fsa.steps_from_initial(s) <= t + 1 && fsa.steps_to_final(s) <= T - t;
  };

  RecordPool pool;
  std::vector<Token> current(S);
  std::vector<Token> next(S);

  for (StateId s : fsa.initial_states()) {
    if (!viable(s, 0)) continue;
    const double score = seq.log_prob(0, fsa.state(s).symbol);
    if (score == kNegInf) continue;
    current[s] = {score, pool.make(0, s, RecordPool::kNull)};
  }
  if (all_dead(current)) throw NumericallyInfeasible(0);

  for (std::size_t t = 1; t < T; ++t) {
    const auto row = seq.log_row(t);
    for (StateId s = 0; s < S; ++s) {
      Token& out = next[s];
      out = Token{};
      if (!viable(s, t)) continue;
      const double emit = row[fsa.state(s).symbol];
      if (emit == kNegInf) continue;
      const auto& preds = fsa.predecessors(s);
      double best = kNegInf;
      StateId from = Predecessors::kNoState;
      for (StateId p : {preds.self, preds.epsilon, preds.skip}) {
        if (p != Predecessors::kNoState && current[p].score > best) {
          best = current[p].score;
          from = p;
        }
      }
      if (from == Predecessors::kNoState) continue;
      out.score = best + emit;
      if (from == s) {
        out.chain = current[s].chain;
        pool.retain(out.chain);
      } else {
        out.chain = pool.make(t, s, current[from].chain);
      }
    }
    for (auto& tok : current) pool.release(tok.chain);
    current.swap(next);
    if (all_dead(current)) throw NumericallyInfeasible(t);
  }

  const auto finals = fsa.final_states();  // {c_n, eps_n}
  StateId winner = finals[1];
  if (current[finals[0]].score > current[winner].score) winner = finals[0];
  if (current[winner].score == kNegInf) throw NumericallyInfeasible(T - 1);

  PathSolution path;
  path.log_prob = current[winner].score;
  path.states.assign(T, 0);
  std::size_t until = T;
  for (std::uint32_t id = current[winner].chain; id != RecordPool::kNull; id = pool[id].parent) {
    const auto& rec = pool[id];
    for (std::size_t t = rec.step; t < until; ++t) path.states[t] = rec.state;
    until = rec.step;
  }
  for (auto& tok : current) pool.release(tok.chain);

  path.step_log_prob.resize(T);
  path.per_step_prob.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    path.step_log_prob[t] = seq.log_prob(t, fsa.state(path.states[t]).symbol);
    path.per_step_prob[t] = std::exp(path.step_log_prob[t]);
  }
  if (stats) {
    stats->columns = 2;
    stats->peak_live_records = pool.peak();
    stats->records_created = pool.created();
  }
  return path;
}

LineConfidence line_confidences(std::span<const double> probs, std::size_t text_length) {
  LineConfidence out;
  if (probs.empty()) return out;
  double sum = 0.0;
  for (double p : probs) sum += p;
  out.gamma = sum / static_cast<double>(probs.size());
  if (text_length < kMinBoundaryChars || probs.size() < kMinBoundaryChars) return out;
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < kBoundaryWindow; ++i) {
    head += probs[i];
    tail += probs[probs.size() - kBoundaryWindow + i];
  }
  out.gamma6 = (head / kBoundaryWindow + tail / kBoundaryWindow) / 2.0;
  return out;
}

std::vector<AlignedLine> insert_newlines(const PathSolution& path, const CompressedSequence& seq,
                                         const TranscriptionFsa& fsa, std::span<const std::string> line_ids) {
  const auto& text = fsa.text();
  const std::size_t n = text.size();
  const std::size_t line_count = seq.line_count();
  if (path.states.size() != seq.steps) throw ValidationError("path length does not match the sequence");
  if (!line_ids.empty() && line_ids.size() != line_count) {
    throw ValidationError(fmt::format("{} line ids for {} lines", line_ids.size(), line_count));
  }

  // Line of the first emission step of every character.
  std::vector<std::size_t> line_of_char(n, line_count);
  for (std::size_t t = 0; t < path.states.size(); ++t) {
    const auto& st = fsa.state(path.states[t]);
    if (st.kind == StateKind::kCharacter && line_of_char[st.position] == line_count) {
      line_of_char[st.position] = seq.line_of_step[t];
    }
  }

  std::vector<AlignedLine> lines(line_count);
  std::size_t cursor = 0;
  bool boundary_consumed = true;  // nothing precedes the first line
  for (std::size_t k = 0; k < line_count; ++k) {
    AlignedLine& line = lines[k];
    line.line_id = line_ids.empty() ? fmt::format("line_{}", k) : line_ids[k];
    const auto span = seq.line_span(k);
    line.start_step = span.begin;
    line.end_step = span.end;

    const std::size_t begin = cursor;
    while (cursor < n && line_of_char[cursor] == k) ++cursor;
    line.char_span = {begin, cursor};
    if (begin == cursor) continue;  // gap line

    std::size_t first = begin;
    std::size_t last = cursor;
    if (!boundary_consumed && utf8::is_whitespace(text[first])) ++first;
    boundary_consumed = false;
    if (last > first && utf8::is_whitespace(text[last - 1])) {
      --last;
      boundary_consumed = true;
    }
    const std::u32string_view body(text.data() + first, last - first);
    line.text = utf8::encode(body);
    if (body.empty()) continue;

    const auto conf = line_confidences(
        std::span<const double>(path.per_step_prob).subspan(span.begin, span.size()), body.size());
    line.gamma = conf.gamma;
    line.gamma6 = conf.gamma6;
  }
  return lines;
}

AlignmentResult align_letter(const CompressedSequence& seq, const TranscriptionFsa& fsa,
                             std::span<const std::string> line_ids, std::string letter_id) {
  const auto started = std::chrono::steady_clock::now();
  AlignmentResult result;
  result.letter_id = std::move(letter_id);
  result.path = decode_best_path(seq, fsa);
  result.total_log_prob = result.path.log_prob;
  result.lines = insert_newlines(result.path, seq, fsa, line_ids);
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

AlignmentResult align_bundle(const LetterBundle& bundle, const Transcription& transcription,
                             const Alphabet& alphabet, double theta) {
  const auto started = std::chrono::steady_clock::now();
  const auto compressed = epsilon_compress(bundle, theta);
  const auto fsa = build_fsa(transcription, alphabet);
  std::vector<std::string> ids;
  ids.reserve(bundle.lines.size());
  for (const auto& line : bundle.lines) ids.push_back(line.line_id);
  auto result = align_letter(compressed, fsa, ids, bundle.letter_id);
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace ctcalign
