#include "ctcalign/fsa.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "ctcalign/error.hpp"
#include "ctcalign/utf8.hpp"

namespace ctcalign {

Transcription make_transcription(std::string_view utf8_text) {
  Transcription t;
  for (char32_t c : utf8::decode(utf8_text)) {
    if (c != U'\n' && c != U'\r') t.text.push_back(c);
  }
  return t;
}

Transcription load_transcription(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return make_transcription(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

TranscriptionFsa::TranscriptionFsa(const Transcription& transcription, const Alphabet& alphabet)
    : text_(transcription.text) {
  const std::size_t n = text_.size();
  if (n == 0) throw ValidationError("cannot build an automaton for an empty transcription");

  states_.reserve(2 * n + 1);
  preds_.resize(2 * n + 1);
  states_.push_back({StateKind::kEpsilon, Alphabet::kEpsilon, 0});
  preds_[0].self = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto symbol = alphabet.index_of(text_[k]);
    if (!symbol) {
      throw ValidationError(
          fmt::format("character {} at position {} is not in the alphabet", utf8::describe(text_[k]), k));
    }
    const StateId c = char_state(k);
    states_.push_back({StateKind::kCharacter, *symbol, k});
    states_.push_back({StateKind::kEpsilon, Alphabet::kEpsilon, k + 1});
    preds_[c].self = c;
    preds_[c].epsilon = c - 1;
    if (k > 0 && text_[k - 1] != text_[k]) preds_[c].skip = c - 2;
    preds_[c + 1].self = c + 1;
    preds_[c + 1].epsilon = c;
  }

  const std::size_t count = states_.size();
  from_initial_.assign(count, 0);
  from_initial_[0] = 1;
  from_initial_[1] = 1;
  for (StateId s = 2; s < count; ++s) {
    const auto& p = preds_[s];
    std::size_t best = from_initial_[p.epsilon] + 1;
    if (p.skip != Predecessors::kNoState) best = std::min(best, from_initial_[p.skip] + 1);
    from_initial_[s] = best;
  }

  to_final_.assign(count, 0);
  to_final_[count - 1] = 1;
  to_final_[count - 2] = 1;
  for (StateId s = count - 2; s-- > 0;) {
    std::size_t best = to_final_[s + 1] + 1;
    if (s % 2 == 1 && s + 2 < count && preds_[s + 2].skip == s) best = std::min(best, to_final_[s + 2] + 1);
    to_final_[s] = best;
  }
  min_path_length_ = to_final_[1];
}

std::vector<StateId> TranscriptionFsa::predecessor_list(StateId id) const {
  std::vector<StateId> out;
  const auto& p = preds_[id];
  for (StateId s : {p.self, p.epsilon, p.skip}) {
    if (s != Predecessors::kNoState) out.push_back(s);
  }
  return out;
}

std::vector<StateId> TranscriptionFsa::successor_list(StateId id) const {
  std::vector<StateId> out;
  for (StateId s = id; s < std::min(id + 3, state_count()); ++s) {
    const auto& p = preds_[s];
    if (p.self == id || p.epsilon == id || p.skip == id) out.push_back(s);
  }
  return out;
}

bool TranscriptionFsa::has_skip(std::size_t position) const {
  return preds_[char_state(position)].skip != Predecessors::kNoState;
}

std::string TranscriptionFsa::debug_dump() const {
  std::string out;
  for (StateId s = 0; s < state_count(); ++s) {
    const auto& st = states_[s];
    std::string label;
    if (st.kind == StateKind::kEpsilon) {
      label = fmt::format("eps{}", st.position);
    } else {
      const char32_t c = text_[st.position];
      label = c == U' ' ? std::string("sp") : utf8::encode(c);
      label = fmt::format("c{}:{}", st.position + 1, label);
    }
    out += fmt::format("{} {} pred=[{}]", s, label, fmt::join(predecessor_list(s), ","));
    if (is_initial(s)) out += " initial";
    if (is_final(s)) out += " final";
    out += '\n';
  }
  return out;
}

TranscriptionFsa build_fsa(const Transcription& transcription, const Alphabet& alphabet) {
  return TranscriptionFsa(transcription, alphabet);
}

namespace {

void extend(const TranscriptionFsa& fsa, std::size_t length, std::vector<StateId>& prefix,
            std::vector<std::vector<StateId>>& out) {
  if (prefix.size() == length) {
    if (fsa.is_final(prefix.back())) out.push_back(prefix);
    return;
  }
  const std::size_t remaining = length - prefix.size();
  for (StateId next : fsa.successor_list(prefix.back())) {
    // Branches that cannot reach a final state in time carry no accepted path.
    if (fsa.steps_to_final(next) > remaining) continue;
    prefix.push_back(next);
    extend(fsa, length, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<std::vector<StateId>> enumerate_paths(const TranscriptionFsa& fsa, std::size_t length) {
  if (length == 0) throw ValidationError("path length must be at least 1");
  if (fsa.state_count() * length > kEnumerationGuard) {
    throw InstanceTooLarge(fmt::format("enumeration of {} states x {} steps exceeds the guard of {}",
                                       fsa.state_count(), length, kEnumerationGuard));
  }
  std::vector<std::vector<StateId>> out;
  std::vector<StateId> prefix;
  prefix.reserve(length);
  for (StateId start : fsa.initial_states()) {
    if (fsa.steps_to_final(start) > length) continue;
    prefix.assign(1, start);
    extend(fsa, length, prefix, out);
  }
  return out;
}

double count_paths(const TranscriptionFsa& fsa, std::size_t length) {
  if (length == 0) return 0.0;
  std::vector<double> column(fsa.state_count(), 0.0);
  for (StateId s : fsa.initial_states()) column[s] = 1.0;
  std::vector<double> next(fsa.state_count());
  for (std::size_t t = 1; t < length; ++t) {
    for (StateId s = 0; s < fsa.state_count(); ++s) {
      double sum = 0.0;
      for (StateId p : fsa.predecessor_list(s)) sum += column[p];
      next[s] = sum;
    }
    column.swap(next);
  }
  double total = 0.0;
  for (StateId s : fsa.final_states()) total += column[s];
  return total;
}

}  // namespace ctcalign
