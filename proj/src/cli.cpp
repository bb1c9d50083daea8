#include "ctcalign/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>

#include "ctcalign/aligner.hpp"
#include "ctcalign/error.hpp"
#include "ctcalign/filter.hpp"
#include "ctcalign/metrics.hpp"
#include "ctcalign/parallel.hpp"
#include "ctcalign/serialize.hpp"
#include "ctcalign/synth.hpp"

namespace ctcalign {

namespace fs = std::filesystem;

namespace {

std::size_t default_workers() {
  if (const char* env = std::getenv("CTC_ALIGN_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::vector<fs::path> expand_all(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& p : patterns) {
    auto paths = expand_glob(p);
    out.insert(out.end(), paths.begin(), paths.end());
  }
  return out;
}

void write_output(const std::string& path, const std::string& contents, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << contents;
  } else {
    write_file(path, contents);
  }
}

// ------------------------------------------------------------------ align

struct AlignOptions {
  std::vector<std::string> manifests;
  std::vector<std::string> transcriptions;
  std::string out;
  std::string out_dir;
  double theta = kDefaultTheta;
  std::size_t workers = 1;
  bool omit_runtime = false;
};

struct LetterOutcome {
  int code = kExitOk;
  std::string message;
  std::string json;
  std::string letter_id;
  std::string log;
};

LetterOutcome failure(int code, std::string message) {
  LetterOutcome o;
  o.code = code;
  o.message = std::move(message);
  return o;
}

LetterOutcome align_one(const AlignOptions& opt, std::size_t i) {
  LetterOutcome outcome;
  try {
    const auto letter = load_letter(opt.manifests[i]);
    const auto transcription = load_transcription(opt.transcriptions[i]);
    const auto started = std::chrono::steady_clock::now();
    const auto compressed = epsilon_compress(letter.bundle, opt.theta);
    const auto fsa = build_fsa(transcription, letter.alphabet);
    std::vector<std::string> ids;
    for (const auto& line : letter.bundle.lines) ids.push_back(line.line_id);
    auto result = align_letter(compressed, fsa, ids, letter.bundle.letter_id);
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto stats = compression_stats(letter.bundle, compressed);
    outcome.letter_id = result.letter_id;
    outcome.log = fmt::format(
        "letter={} lines={} chars={} avg_line_steps={:.1f} raw_steps={} compressed_steps={} ratio={:.3f} "
        "seconds={:.3f}",
        result.letter_id, letter.bundle.lines.size(), transcription.char_count(), stats.avg_line_steps,
        stats.raw_letter_steps, stats.compressed_letter_steps, stats.ratio, result.runtime_seconds);
    if (opt.omit_runtime) result.runtime_seconds = 0.0;
    outcome.json = dump(to_json(result));
  } catch (const AlignmentInfeasible& e) {
    outcome = failure(kExitInfeasible, fmt::format("{}: {}", opt.manifests[i], e.what()));
  } catch (const NumericallyInfeasible& e) {
    outcome = failure(kExitInfeasible, fmt::format("{}: {}", opt.manifests[i], e.what()));
  } catch (const Error& e) {
    outcome = failure(kExitInputError, e.what());
  } catch (const std::exception& e) {
    outcome = failure(kExitInputError, fmt::format("{}: {}", opt.manifests[i], e.what()));
  }
  return outcome;
}

int cmd_align(const AlignOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.manifests.size() != opt.transcriptions.size()) {
    err << "error: each --manifest needs a matching --transcription\n";
    return kExitInputError;
  }
  if (opt.manifests.size() > 1 && opt.out_dir.empty()) {
    err << "error: several letters need --out-dir\n";
    return kExitInputError;
  }
  if (!(opt.theta > 0.0 && opt.theta < 1.0)) {
    err << fmt::format("error: theta {} outside (0,1)\n", opt.theta);
    return kExitInputError;
  }
  const auto outcomes = parallel_map<LetterOutcome>(opt.manifests.size(), opt.workers,
                                                    [&](std::size_t i) { return align_one(opt, i); });
  int code = kExitOk;
  for (const auto& o : outcomes) {
    if (o.code != kExitOk) {
      err << "error: " << o.message << '\n';
      if (code == kExitOk || o.code == kExitInputError) code = o.code;
      continue;
    }
    err << o.log << '\n';
    try {
      if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        write_file(fs::path(opt.out_dir) / (o.letter_id + ".json"), o.json);
      } else {
        write_output(opt.out, o.json, out);
      }
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      code = kExitInputError;
    }
  }
  return code;
}

// ------------------------------------------------------------------ eval

struct EvalOptions {
  std::string gt;
  std::vector<std::string> pred;
  std::size_t n = 6;
  std::string out;
  bool per_letter = false;
  std::size_t buckets = 10;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto gt = load_line_sets(opt.gt);
    std::vector<LineSet> pred;
    std::vector<AlignmentResult> alignments;
    const auto pred_paths = expand_all(opt.pred);
    if (pred_paths.empty()) throw FormatError("no prediction files match");
    for (const auto& path : pred_paths) {
      const auto doc = Json::parse(read_file(path));
      auto sets = line_sets_from_json(doc);
      pred.insert(pred.end(), sets.begin(), sets.end());
      const auto docs = doc.is_array() ? doc : Json::array({doc});
      for (const auto& d : docs) {
        if (!d.at("lines").empty() && d.at("lines").front().is_object()) alignments.push_back(alignment_from_json(d));
      }
    }
    const auto ev = evaluate(gt, pred, opt.n);
    Json report = to_json(ev.corpus);
    for (const char* key : {"line_accuracy", "cer", "wer", "cer_n"}) {
      if (report[key].is_null()) err << fmt::format("warning: {} is undefined for this input\n", key);
    }
    if (opt.per_letter) {
      report["letters"] = Json::array();
      for (const auto& l : ev.letters) {
        auto entry = to_json(l.report);
        entry["letter_id"] = l.letter_id;
        report["letters"].push_back(std::move(entry));
      }
    }
    if (!alignments.empty()) {
      std::map<std::string, const LineSet*> gt_by_id;
      for (const auto& g : gt) gt_by_id[g.letter_id] = &g;
      std::vector<ScoredLine> scored;
      for (const auto& a : alignments) {
        const auto it = gt_by_id.find(a.letter_id);
        if (it == gt_by_id.end()) continue;
        const auto& g = it->second->lines;
        for (std::size_t j = 0; j < std::min(g.size(), a.lines.size()); ++j) {
          scored.push_back({a.lines[j].gamma6, lines_match(g[j], a.lines[j].text)});
        }
      }
      report["confidence_buckets"] = Json::array();
      for (const auto& b : confidence_buckets(scored, opt.buckets)) {
        report["confidence_buckets"].push_back({{"bucket_low", b.low},
                                                {"bucket_high", b.high},
                                                {"line_accuracy", b.line_accuracy ? Json(*b.line_accuracy) : Json()},
                                                {"count", b.count}});
      }
    }
    write_output(opt.out, dump(report), out);
    return kExitOk;
  } catch (const Json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

// ------------------------------------------------------------------ filter

struct FilterOptions {
  std::vector<std::string> alignments;
  double threshold = 0.5;
  std::string measure = "gamma6";
  std::string out;
  std::string sweep;
  std::string previous;
  std::size_t iteration = 0;
};

int cmd_filter(const FilterOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto paths = expand_all(opt.alignments);
    if (paths.empty()) throw FormatError("no alignment files match");
    std::vector<AlignmentResult> results;
    std::vector<SourceRef> sources;
    for (const auto& path : paths) {
      const auto contents = read_file(path);
      try {
        results.push_back(alignment_from_json(Json::parse(contents)));
      } catch (const std::exception& e) {
        throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
      }
      sources.push_back({path.generic_string(), sha256_hex(contents)});
    }
    const FilterSpec spec{opt.threshold, parse_measure(opt.measure)};

    TrainingManifest manifest;
    if (!opt.previous.empty()) {
      const auto prior = manifest_from_jsonl(read_file(opt.previous));
      auto step = iteration_step(prior, results, spec, sources);
      manifest = std::move(step.manifest);
      err << fmt::format("iteration {}: added={} removed={} modified={}\n", manifest.iteration,
                         step.diff.added.size(), step.diff.removed.size(), step.diff.modified.size());
      auto list = [&](const char* tag, const std::vector<EntryKey>& keys) {
        for (const auto& k : keys) err << fmt::format("  {} {}/{}\n", tag, k.letter_id, k.line_id);
      };
      list("+", step.diff.added);
      list("-", step.diff.removed);
      list("~", step.diff.modified);
    } else {
      manifest = filter_alignments(results, spec, sources);
      manifest.iteration = opt.iteration;
    }

    std::size_t total = 0;
    for (const auto& r : results) total += r.lines.size();
    err << fmt::format("kept {} of {} lines ({} > {})\n", manifest.entries.size(), total, opt.measure, opt.threshold);
    if (!opt.sweep.empty()) {
      const auto thresholds = parse_sweep(opt.sweep);
      out << "threshold\tkept\n";
      for (const auto& row : threshold_sweep(results, thresholds, spec.measure)) {
        out << fmt::format("{}\t{}\n", row.threshold, row.kept);
      }
    }
    if (!opt.out.empty()) write_file(opt.out, manifest_to_jsonl(manifest));
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

// ------------------------------------------------------------------ synth

int cmd_synth(const std::string& spec_path, const std::string& alphabet_path, const std::string& out_dir,
              std::ostream& out, std::ostream& err) {
  try {
    const auto spec = synth_spec_from_json_text(read_file(spec_path));
    const auto alphabet = alphabet_path.empty() ? alphabet_for(spec) : load_alphabet(alphabet_path);
    const auto manifest = write_synthetic_letter(spec, alphabet, out_dir);
    out << manifest.generic_string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

// ------------------------------------------------------------------ stats

struct StatsOptions {
  std::vector<std::string> manifests;
  std::vector<std::string> alignments;
  double theta = kDefaultTheta;
  std::string out;
  std::size_t workers = 1;
};

int cmd_stats(const StatsOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto paths = expand_all(opt.manifests);
    if (paths.empty()) throw FormatError("no manifests given");
    const auto rows = parallel_map<Json>(paths.size(), opt.workers, [&](std::size_t i) {
      const auto letter = load_letter(paths[i]);
      const auto s = compression_stats(letter.bundle, epsilon_compress(letter.bundle, opt.theta));
      return Json{{"letter_id", letter.bundle.letter_id},
                  {"lines", letter.bundle.lines.size()},
                  {"avg_line_steps", s.avg_line_steps},
                  {"raw_letter_steps", s.raw_letter_steps},
                  {"compressed_letter_steps", s.compressed_letter_steps},
                  {"ratio", s.ratio}};
    });
    double line_steps = 0.0;
    double raw = 0.0;
    double compressed = 0.0;
    for (const auto& r : rows) {
      line_steps += r["avg_line_steps"].get<double>();
      raw += static_cast<double>(r["raw_letter_steps"].get<std::size_t>());
      compressed += static_cast<double>(r["compressed_letter_steps"].get<std::size_t>());
    }
    const double count = static_cast<double>(rows.size());
    Json summary{{"letters", rows.size()},
                 {"theta", opt.theta},
                 {"avg_line_steps", line_steps / count},
                 {"avg_raw_letter_steps", raw / count},
                 {"avg_compressed_letter_steps", compressed / count},
                 {"ratio", raw / compressed}};
    const auto alignment_paths = expand_all(opt.alignments);
    if (!alignment_paths.empty()) {
      double seconds = 0.0;
      for (const auto& p : alignment_paths) seconds += load_alignment(p).runtime_seconds;
      summary["avg_runtime_seconds"] = seconds / static_cast<double>(alignment_paths.size());
    }
    write_output(opt.out, dump(Json{{"summary", summary}, {"letters", rows}}), out);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Force-align letter transcriptions to CTC line posteriors", "ctc-align"};
  app.require_subcommand(1);

  AlignOptions align_opt;
  align_opt.workers = default_workers();
  auto* align = app.add_subcommand("align", "Align letter transcriptions to their line posteriors");
  align->add_option("--manifest", align_opt.manifests, "Letter manifest JSON (repeatable)")->required();
  align->add_option("--transcription", align_opt.transcriptions, "Letter transcription, UTF-8 (repeatable)")
      ->required();
  align->add_option("--out", align_opt.out, "Output file for a single letter (default stdout)");
  align->add_option("--out-dir", align_opt.out_dir, "Write <letter_id>.json per letter");
  align->add_option("--theta", align_opt.theta, "Blank compression threshold")->capture_default_str();
  align->add_option("--workers", align_opt.workers, "Letters aligned in parallel (env CTC_ALIGN_WORKERS)")
      ->check(CLI::PositiveNumber);
  align->add_flag("--omit-runtime", align_opt.omit_runtime, "Write runtime_seconds as 0 for reproducible files");

  EvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "Line accuracy, CER, WER and CER_n against ground truth");
  eval->add_option("--gt", eval_opt.gt, "Ground-truth line sets")->required();
  eval->add_option("--pred", eval_opt.pred, "Predicted line sets or alignment outputs (globs allowed)")->required();
  eval->add_option("-n", eval_opt.n, "Boundary width for CER_n")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_opt.out, "Report file (default stdout)");
  eval->add_flag("--per-letter", eval_opt.per_letter, "Include a per-letter breakdown");
  eval->add_option("--buckets", eval_opt.buckets, "Confidence buckets for alignment inputs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  FilterOptions filter_opt;
  auto* filter = app.add_subcommand("filter", "Keep confidently aligned lines as a training manifest");
  filter->add_option("--alignments", filter_opt.alignments, "Alignment outputs (globs allowed)")->required();
  filter->add_option("--threshold", filter_opt.threshold, "Strict lower bound on the confidence")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  filter->add_option("--measure", filter_opt.measure, "gamma6 or gamma")
      ->capture_default_str()
      ->check(CLI::IsMember({"gamma6", "gamma"}));
  filter->add_option("--out", filter_opt.out, "Training manifest, JSON Lines");
  filter->add_option("--sweep", filter_opt.sweep, "Print kept counts for start:stop:step thresholds");
  filter->add_option("--previous", filter_opt.previous, "Prior manifest; writes the next iteration and a diff");
  filter->add_option("--iteration", filter_opt.iteration, "Iteration counter without --previous")
      ->capture_default_str();

  std::string synth_spec;
  std::string synth_alphabet;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate synthetic posteriors and a letter manifest");
  synth->add_option("--spec", synth_spec, "Synthetic letter spec JSON")->required();
  synth->add_option("--alphabet", synth_alphabet, "Alphabet file (default: symbols of the letter)");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();

  StatsOptions stats_opt;
  stats_opt.workers = default_workers();
  auto* stats = app.add_subcommand("stats", "Sequence lengths and compression ratios per letter");
  stats->add_option("--manifest", stats_opt.manifests, "Letter manifests (globs allowed)")->required();
  stats->add_option("--alignments", stats_opt.alignments, "Alignment outputs for runtime averages");
  stats->add_option("--theta", stats_opt.theta, "Blank compression threshold")->capture_default_str();
  stats->add_option("--out", stats_opt.out, "Report file (default stdout)");
  stats->add_option("--workers", stats_opt.workers, "Parallel letters")->check(CLI::PositiveNumber);

  std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(std::move(rest));
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream er;
    const int rc = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return rc == 0 ? kExitOk : kExitInputError;
  }

  if (align->parsed()) return cmd_align(align_opt, out, err);
  if (eval->parsed()) return cmd_eval(eval_opt, out, err);
  if (filter->parsed()) return cmd_filter(filter_opt, out, err);
  if (synth->parsed()) return cmd_synth(synth_spec, synth_alphabet, synth_out, out, err);
  if (stats->parsed()) return cmd_stats(stats_opt, out, err);
  return kExitInputError;
}

}  // namespace ctcalign
