// clonesearch: ingest disassembly exports, build splits, train, evaluate and
// search. Every command prints one "error: <kind>: <message>" line and exits
// non-zero on failure.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clonesearch/checkpoint.hpp"
#include "clonesearch/config.hpp"
#include "clonesearch/corpus.hpp"
#include "clonesearch/evaluation.hpp"
#include "clonesearch/search.hpp"
#include "clonesearch/splits.hpp"
#include "clonesearch/synth.hpp"
#include "clonesearch/training.hpp"
#include "clonesearch/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clonesearch;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file first, then --set overrides, then dedicated flags.
struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", path, "INI config with [data] [model] [loss] [train]");
    cmd->add_option("--set", sets, "override, e.g. --set train.epochs=5")->take_all();
    cmd->add_option("--seed", seed, "run seed fanned out to all sub-streams");
  }

  AppConfig load() const {
    AppConfig cfg = path.empty() ? AppConfig{} : load_config(path);
    for (const auto& s : sets) {
      size_t eq = s.find('=');
      if (eq == std::string::npos) throw config_error("--set expects key=value, got '" + s + "'");
      apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) apply_override(cfg, "train.seed", std::to_string(*seed));
    return cfg;
  }
};

CorpusStore load_or_new_corpus(const fs::path& path, const std::string& arch_vocab, const std::string& opt_vocab) {
  if (fs::exists(path)) return load_corpus(path);
  Vocabularies v = Vocabularies::defaults();
  if (!arch_vocab.empty()) v.arch = split_commas(arch_vocab);
  if (!opt_vocab.empty()) v.opt = split_commas(opt_vocab);
  return CorpusStore(v);
}

SplitManifest load_train_split(const fs::path& p) {
  if (fs::is_directory(p)) return load_split(p / (split_file_stem(kSplitTrain) + ".json"));
  return load_split(p);
}

std::string query_text_from_file(const fs::path& path) {
  const std::string text = read_file_maybe_gz(path);
  // an export-schema object is flattened; anything else is instruction text
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    auto fns = parse_export_text(text, path.string());
    if (fns.size() != 1) throw parse_error("query file must hold exactly one function");
    return file2ins(fns.front().blocks);
  }
  return text;
}

void print_json(const json& j) { std::cout << j.dump() << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clonesearch: learned clone search over disassembled functions"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       "clonesearch corpus:" + std::string(kCorpusFormat) + "/v" + std::to_string(kCorpusVersion) +
                           " checkpoint:v" + std::to_string(kCheckpointVersion) + " index:v" +
                           std::to_string(kIndexVersion) + " report:v" + std::to_string(kReportSchemaVersion));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "add export files to a corpus");
  std::vector<std::string> in_files;
  std::string library, arch, opt, corpus_path, synth_manifest, arch_vocab, opt_vocab;
  bool dedupe = false;
  ingest->add_option("--in", in_files, "export file(s), JSON lines, optionally gzip'd");
  ingest->add_option("--library", library);
  ingest->add_option("--arch", arch);
  ingest->add_option("--opt", opt);
  ingest->add_option("--corpus", corpus_path, "corpus file, created or extended")->required();
  ingest->add_option("--manifest", synth_manifest, "ingest every file listed in a synth manifest");
  ingest->add_option("--arch-vocab", arch_vocab, "comma list for a new corpus");
  ingest->add_option("--opt-vocab", opt_vocab, "comma list for a new corpus");
  ingest->add_flag("--dedupe", dedupe, "drop repeated (path, name) functions");

  // pairs
  auto* pairs = app.add_subcommand("pairs", "build TRAIN and OOD split manifests");
  ConfigFlags pairs_cfg;
  pairs_cfg.add_to(pairs);
  std::string pairs_corpus, pairs_out;
  std::optional<size_t> train_pairs, test_pairs;
  bool no_subsplits = false;
  pairs->add_option("--corpus", pairs_corpus);
  pairs->add_option("--out", pairs_out, "output directory")->required();
  pairs->add_option("--train-pairs", train_pairs);
  pairs->add_option("--test-pairs", test_pairs);
  pairs->add_flag("--no-subsplits", no_subsplits, "skip the sameA/diffA/sameO/diffO manifests");

  // train
  auto* trainc = app.add_subcommand("train", "train a checkpoint on a TRAIN split");
  ConfigFlags train_cfg;
  train_cfg.add_to(trainc);
  std::string train_splits, train_corpus, train_out, telemetry_path;
  std::optional<size_t> epochs;
  trainc->add_option("--splits", train_splits, "TRAIN manifest or the directory written by pairs")->required();
  trainc->add_option("--corpus", train_corpus);
  trainc->add_option("--out", train_out, "checkpoint directory")->required();
  trainc->add_option("--epochs", epochs);
  trainc->add_option("--telemetry", telemetry_path, "JSON lines, default <out>/telemetry.jsonl");

  // eval
  auto* evalc = app.add_subcommand("eval", "metrics of a checkpoint on a split");
  std::string eval_ckpt, eval_split, eval_corpus, eval_report, eval_csv;
  evalc->add_option("--checkpoint", eval_ckpt)->required();
  evalc->add_option("--split", eval_split)->required();
  evalc->add_option("--corpus", eval_corpus)->required();
  evalc->add_option("--report", eval_report, "report JSON path (default: stdout)");
  evalc->add_option("--csv", eval_csv, "append an auc,accu,prc,rcl,f1 row to this file");

  // index
  auto* indexc = app.add_subcommand("index", "encode a corpus into a search index");
  std::string index_ckpt, index_corpus, index_out;
  indexc->add_option("--checkpoint", index_ckpt)->required();
  indexc->add_option("--corpus", index_corpus)->required();
  indexc->add_option("--out", index_out)->required();

  // search
  auto* searchc = app.add_subcommand("search", "rank index entries against a query function");
  std::string search_index, search_ckpt, query_file;
  size_t top_n = 10;
  searchc->add_option("--index", search_index)->required();
  searchc->add_option("--checkpoint", search_ckpt, "checkpoint that built the index")->required();
  searchc->add_option("--query-file", query_file, "instruction text or one export-schema object")->required();
  searchc->add_option("--top", top_n);

  // synth
  auto* synthc = app.add_subcommand("synth", "write a synthetic multi-architecture export corpus");
  std::string synth_spec, synth_out, write_spec;
  std::optional<uint64_t> synth_seed;
  synthc->add_option("--spec", synth_spec, "SyntheticSpec JSON (default: built-in)");
  synthc->add_option("--out", synth_out, "output directory");
  synthc->add_option("--seed", synth_seed);
  synthc->add_option("--write-default-spec", write_spec, "write the built-in spec JSON and exit");

  // grad-check
  auto* gradc = app.add_subcommand("grad-check", "finite differences on a tiny random instance");
  ConfigFlags grad_cfg;
  grad_cfg.add_to(gradc);
  bool grad_embedder = false;
  gradc->add_flag("--train-embedder", grad_embedder, "include the token table and dense layer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*ingest) {
      CorpusStore store = load_or_new_corpus(corpus_path, arch_vocab, opt_vocab);
      IngestOptions options;
      options.dedupe = dedupe;
      struct Job {
        fs::path file;
        FunctionMeta meta;
      };
      std::vector<Job> jobs;
      if (!synth_manifest.empty()) {
        SynthOutput layout = SynthOutput::from_json(json::parse(read_file(synth_manifest)));
        if (!fs::exists(corpus_path)) {
          Vocabularies v = Vocabularies::defaults();
          v.arch = layout.arch_vocab;
          v.opt = layout.opt_vocab;
          store = CorpusStore(v);
        }
        const fs::path base = fs::path(synth_manifest).parent_path();
        for (const auto& f : layout.files) jobs.push_back({base / f.file, {f.library, f.architecture, f.optimization}});
      }
      for (const auto& f : in_files) {
        if (library.empty() || arch.empty() || opt.empty()) {
          throw Error("usage", "--in needs --library, --arch and --opt");
        }
        jobs.push_back({f, {library, arch, opt}});
      }
      if (jobs.empty()) throw Error("usage", "nothing to ingest: pass --in or --manifest");
      size_t added = 0, small = 0, dup = 0;
      for (const auto& job : jobs) {
        IngestResult r = ingest_export(job.file, job.meta, store.vocab(), options);
        small += r.skipped_small;
        dup += r.skipped_duplicate;
        for (auto& rec : r.records) {
          store.add(std::move(rec));
          ++added;
        }
      }
      save_corpus(store, corpus_path);
      print_json({{"added", added}, {"skipped_small", small}, {"skipped_duplicate", dup}, {"records", store.size()}});
    } else if (*pairs) {
      AppConfig cfg = pairs_cfg.load();
      if (!pairs_corpus.empty()) cfg.data.corpus = pairs_corpus;
      if (cfg.data.corpus.empty()) throw Error("usage", "no corpus: pass --corpus or set data.corpus");
      if (train_pairs) cfg.data.splits.train_pairs = *train_pairs;
      if (test_pairs) cfg.data.splits.test_pairs = *test_pairs;
      CorpusStore store = load_corpus(cfg.data.corpus);
      json summary = json::array();
      for (const auto& split : build_splits(store, cfg.data.splits)) {
        save_split(split, fs::path(pairs_out) / (split_file_stem(split.name) + ".json"));
        summary.push_back({{"split", split.name}, {"pairs", split.pairs.size()}});
        if (no_subsplits || (split.name != kSplitOodArch && split.name != kSplitOodLibs)) continue;
        for (auto c : {SubCriterion::kSameArch, SubCriterion::kDiffArch, SubCriterion::kSameOpt, SubCriterion::kDiffOpt}) {
          auto kept = filter_pairs(split, c);
          const bool both = std::any_of(kept.begin(), kept.end(), [](const auto& p) { return p.label == 1; }) &&
                            std::any_of(kept.begin(), kept.end(), [](const auto& p) { return p.label == 0; });
          if (!both) {
            summary.push_back({{"split", split.name + "-" + to_string(c)}, {"skipped", "needs both labels"}});
            continue;
          }
          SplitManifest sub = subfilter(split, c);
          save_split(sub, fs::path(pairs_out) / (split_file_stem(sub.name) + ".json"));
          summary.push_back({{"split", sub.name}, {"pairs", sub.pairs.size()}});
        }
      }
      print_json(summary);
    } else if (*trainc) {
      AppConfig cfg = train_cfg.load();
      if (!train_corpus.empty()) cfg.data.corpus = train_corpus;
      if (cfg.data.corpus.empty()) throw Error("usage", "no corpus: pass --corpus or set data.corpus");
      if (epochs) cfg.train.epochs = *epochs;
      CorpusStore store = load_corpus(cfg.data.corpus);
      SplitManifest split = load_train_split(train_splits);
      const fs::path tel_path = telemetry_path.empty() ? fs::path(train_out) / "telemetry.jsonl" : fs::path(telemetry_path);
      std::string telemetry;
      TrainResult result = train(cfg.train, split, store, [&](const EpochTelemetry& t) {
        std::string line = telemetry_json(t, cfg.train).dump();
        std::cerr << line << "\n";
        telemetry += line + "\n";
      });
      save_checkpoint(result.model, train_out);
      write_file(tel_path, telemetry);
      print_json({{"checkpoint", train_out}, {"fingerprint", model_fingerprint(result.model)}, {"steps", result.model.step}});
    } else if (*evalc) {
      Model model = load_checkpoint(eval_ckpt);
      MetricsReport report = evaluate(model, load_split(eval_split), load_corpus(eval_corpus));
      const std::string text = report.to_json().dump(2) + "\n";
      if (eval_report.empty()) std::cout << text;
      else write_file(eval_report, text);
      if (!eval_csv.empty()) {
        const bool fresh = !fs::exists(eval_csv);
        std::ofstream out(eval_csv, std::ios::app);
        if (!out) throw io_error("cannot open " + eval_csv);
        if (fresh) out << csv_header() << "\n";
        out << csv_row(report) << "\n";
      }
    } else if (*indexc) {
      Model model = load_checkpoint(index_ckpt);
      CorpusStore store = load_corpus(index_corpus);
      SearchIndex index = build_index(model, store.records());
      save_index(index, index_out);
      print_json({{"index", index_out}, {"entries", index.size()}, {"dim", index.dim}});
    } else if (*searchc) {
      Model model = load_checkpoint(search_ckpt);
      SearchIndex index = load_index(search_index);
      for (const auto& h : query_text(model, index, query_text_from_file(query_file), top_n)) {
        print_json({{"rank", h.rank}, {"id", h.id}, {"name", h.name}, {"sscore", h.sscore}});
      }
    } else if (*synthc) {
      if (!write_spec.empty()) {
        write_file(write_spec, SyntheticSpec::defaults().to_json().dump(2) + "\n");
        return 0;
      }
      if (synth_out.empty()) throw Error("usage", "synth needs --out");
      SyntheticSpec spec =
          synth_spec.empty() ? SyntheticSpec::defaults() : SyntheticSpec::from_json(json::parse(read_file(synth_spec)));
      if (synth_seed) spec.seed = *synth_seed;
      SynthOutput layout = write_synthetic_corpus(spec, synth_out);
      print_json({{"out", synth_out}, {"files", layout.files.size()}});
    } else if (*gradc) {
      AppConfig cfg = grad_cfg.load();
      if (grad_embedder) cfg.train.freeze_embedder = false;
      TinyInstance inst = make_tiny_instance(cfg.train, cfg.train.seed);
      GradCheckReport r = grad_check(inst.model, inst.batch);
      json per = json::object();
      for (const auto& [name, err] : r.per_parameter) per[name] = err;
      print_json({{"pass", r.pass},
                  {"max_rel_error", r.max_rel_error},
                  {"worst_parameter", r.worst_parameter},
                  {"checked", r.checked},
                  {"per_parameter", per}});
      return r.pass ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: parse: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
