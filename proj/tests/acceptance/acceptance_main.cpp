// Acceptance run: one PASS/FAIL line per criterion with its runtime budget.
// The exit status covers every gated check; the ablation ordering of the
// synthetic experiment is reported but not gated (see README).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../synth_setup.hpp"
#include "../test_support.hpp"
#include "clonesearch/checkpoint.hpp"
#include "clonesearch/corpus.hpp"
#include "clonesearch/evaluation.hpp"
#include "clonesearch/model.hpp"
#include "clonesearch/removal.hpp"
#include "clonesearch/search.hpp"
#include "clonesearch/splits.hpp"
#include "clonesearch/synth.hpp"
#include "clonesearch/training.hpp"

namespace fs = std::filesystem;
using namespace clonesearch;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  // false when the result is printed but does not decide the exit status
  bool gated_pass = true;
};

// Collects the first few failure messages of a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) first_ += (first_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& summary) const {
    Outcome o;
    o.pass = failures_ == 0;
    o.gated_pass = o.pass;
    std::ostringstream s;
    s << summary << " [" << checks_ - failures_ << "/" << checks_ << " checks]";
    if (!o.pass) s << " first failures: " << first_;
    o.detail = s.str();
    return o;
  }

 private:
  size_t checks_ = 0;
  size_t failures_ = 0;
  std::string first_;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double total = 0.0;
  double n = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      total += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      n += 1.0;
    }
  }
  return total / n;
}

Outcome metric_oracles() {
  Checker c;
  Rng rng(derive_seed(1, "acceptance/metrics"));
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // a coarse grid forces ties
    for (size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(10)) / 10.0;
      y[i] = static_cast<int>(rng.below(2));
    }
    // at least one label of each class
    const size_t i_pos = rng.below(n);
    y[i_pos] = 1;
    y[(i_pos + 1 + rng.below(n - 1)) % n] = 0;
    const double err = std::abs(roc_auc(s, y) - pairwise_auc(s, y));
    worst = std::max(worst, err);
    c.expect(err <= 1e-9, "auc instance " + std::to_string(t));
  }
  for (int t = 0; t < 50; ++t) {
    ConfusionCounts k{rng.below(30), rng.below(30), rng.below(30), rng.below(30)};
    if (k.total() == 0) k.tn = 1;
    const auto m = prf1(k);
    const double p = k.tp + k.fp ? double(k.tp) / double(k.tp + k.fp) : 0.0;
    const double r = k.tp + k.fn ? double(k.tp) / double(k.tp + k.fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    const double a = double(k.tp + k.tn) / double(k.total());
    c.expect(std::abs(m.precision - p) <= 1e-12 && std::abs(m.recall - r) <= 1e-12 && std::abs(m.f1 - f) <= 1e-12 &&
                 std::abs(m.accuracy - a) <= 1e-12,
             "confusion matrix " + std::to_string(t));
  }
  return c.outcome("200 AUC instances, max |auc - pairwise| = " + fmt(worst, 17) + "; 50 confusion matrices");
}

Outcome loss_identities() {
  Checker c;
  Eigen::VectorXd z(4);
  z << 0.3, -1.2, 2.0, 0.7;
  c.expect(cosine_loss(z, z, 1) == 0.0, "cosine_loss(z, z, 1)");
  c.expect(rl_loss(1.0, 1.0, 3.7) == 0.0, "rl_loss(1, 1, R)");

  GaussianParams g{Eigen::VectorXd::Constant(3, 0.4), Eigen::VectorXd::Constant(3, -0.2)};
  Encoding enc = reparameterize(g, Eigen::VectorXd::Zero(3));
  Eigen::VectorXd e(2);
  e << 0.5, -0.25;
  const auto cv = cvib_loss(e, e, enc, enc, e, e, g, g, 0.9);
  c.expect(cv.total == 0.0, "cvib total at perfect reconstruction with posterior = prior");

  TrainConfig off;
  off.enable_removal = false;
  off.enable_cvib = false;
  Rng rng(derive_seed(2, "acceptance/losses"));
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<PairTerms> terms(1 + rng.below(16));
    for (auto& p : terms) p = {rng.uniform() * 4, rng.uniform(), rng.uniform(), rng.uniform() * 9, rng.uniform() * 9};
    const auto l = composite_loss(terms, off);
    double mean = 0.0;
    for (const auto& p : terms) mean += p.l_cos;
    mean /= static_cast<double>(terms.size());
    worst = std::max(worst, std::abs(l.total - l.l_cos));
    c.expect(std::abs(l.total - l.l_cos) <= 1e-12 && std::abs(l.l_cos - mean) <= 1e-12, "composite with flags off");
  }
  // the same identity through a real forward pass
  auto inst = make_tiny_instance(off, 5, 4);
  const auto br = run_batch(inst.model, inst.batch, nullptr);
  c.expect(br.loss.total == br.loss.l_cos, "forward pass with flags off");
  return c.outcome("max |total - L_cos| with both flags off = " + fmt(worst, 17));
}

Outcome gradient_checks() {
  Checker c;
  double worst_rl = 0.0, worst_cv = 0.0;
  size_t checked = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig rl;
    rl.enable_cvib = false;
    rl.beta1 = 1.0;
    rl.freeze_embedder = false;
    auto a = make_tiny_instance(rl, seed);
    c.expect(a.model.backend.info().dim <= 8, "RL instance dimension");
    auto ra = grad_check(a.model, a.batch);
    worst_rl = std::max(worst_rl, ra.max_rel_error);
    checked += ra.checked;
    c.expect(ra.pass, "RL path seed " + std::to_string(seed) + " " + ra.worst_parameter);

    TrainConfig cv;
    cv.enable_removal = false;
    cv.beta2 = 0.5;
    cv.freeze_embedder = false;
    auto b = make_tiny_instance(cv, seed);
    c.expect(b.model.backend.info().dim <= 8 && b.model.latent_dim() <= 3, "CVIB instance dimensions");
    auto rb = grad_check(b.model, b.batch);
    worst_cv = std::max(worst_cv, rb.max_rel_error);
    checked += rb.checked;
    bool prior_seen = false, decoder_seen = false, encoder_seen = false;
    for (const auto& [name, err] : rb.per_parameter) {
      prior_seen |= name.rfind("cvib.prior", 0) == 0;
      decoder_seen |= name.rfind("cvib.dec", 0) == 0;
      encoder_seen |= name.rfind("cvib.enc", 0) == 0;
    }
    c.expect(prior_seen && decoder_seen && encoder_seen, "CVIB check covers encoder, decoder and prior");
    c.expect(rb.pass, "CVIB path seed " + std::to_string(seed) + " " + rb.worst_parameter);
  }
  return c.outcome("5 seeds per path, " + std::to_string(checked) + " coordinates; max rel error RL " +
                   fmt(worst_rl, 7) + ", CVIB " + fmt(worst_cv, 7));
}

Outcome removal_contracts() {
  Checker c;
  CompactOptions opts;
  opts.dim = 16;
  opts.max_length = 64;
  opts.k_limit = 64;
  opts.vocab_size = 997;
  opts.seed = 3;
  const auto backend = EncoderBackend::compact(opts);
  Rng rng(derive_seed(4, "acceptance/removal"));
  static const char* words[] = {"mov", "add", "r1", "r2", "0x10", "call", "[", "sp", "+", "]", "xor", ",", "jmp"};
  double worst_sum = 0.0;
  for (int t = 0; t < 500; ++t) {
    RemovalAgent agent = RemovalAgent::init(opts.dim, rng.next());
    agent.conv_weight *= 1.0 + 4.0 * rng.uniform();
    std::string text;
    for (size_t n = 1 + rng.below(80); n > 0; --n) text += std::string(words[rng.below(13)]) + " ";
    const auto seq = backend.tokenize(text);
    const auto probs = score_tokens(seq, backend, agent);
    double sum = 0.0;
    bool pads_zero = true;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (seq.attention_mask[i]) {
        sum += probs[i];
      } else {
        pads_zero &= probs[i] == 0.0;
      }
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    c.expect(std::abs(sum - 1.0) <= 1e-6, "softmax sum");
    c.expect(pads_zero, "pad mass");

    const size_t live = seq.true_length;
    const size_t k = 1 + rng.below(live);
    const auto sel = select_topk(probs, seq, k);
    double min_kept = 1.0, max_unkept = 0.0;
    for (size_t i = 0; i < live; ++i) {
      if (std::binary_search(sel.kept_indices.begin(), sel.kept_indices.end(), i)) {
        min_kept = std::min(min_kept, probs[i]);
      } else {
        max_unkept = std::max(max_unkept, probs[i]);
      }
    }
    c.expect(sel.kept_indices.size() == k, "selection size");
    c.expect(min_kept >= max_unkept, "min selected >= max unselected");

    const auto all = select_topk(probs, seq, live);
    std::vector<size_t> identity(live);
    for (size_t i = 0; i < live; ++i) identity[i] = i;
    c.expect(all.kept_indices == identity, "k = live length keeps every position in order");
    c.expect(std::abs(all.p - 1.0) <= 1e-6, "k = live length gives p = 1");
  }
  return c.outcome("500 sequences, max |sum softmax - 1| = " + fmt(worst_sum, 17));
}

CorpusStore fixture_corpus() {
  CorpusStore store;
  const fs::path dir = FIXTURE_DIR;
  for (const auto& entry : fs::directory_iterator(dir / "smoke")) {
    const std::string stem = entry.path().stem().string();
    const size_t a = stem.find('_'), b = stem.rfind('_');
    FunctionMeta meta{stem.substr(0, a), stem.substr(a + 1, b - a - 1), stem.substr(b + 1)};
    for (auto& r : ingest_export(entry.path(), meta, store.vocab()).records) store.add(std::move(r));
  }
  for (const char* name : {"export_12.jsonl", "export_9.jsonl", "export_10_3.jsonl"}) {
    for (auto& r : ingest_export(dir / name, {"fixtures", "AMD64", "O3"}, store.vocab()).records) store.add(std::move(r));
  }
  return store;
}

Outcome nuisance_blindness() {
  Checker c;
  const CorpusStore store = fixture_corpus();
  TrainConfig cfg;
  cfg.dim = 32;
  cfg.max_length = 128;
  cfg.k = 48;
  cfg.latent_dim = 16;
  cfg.seed = 9;
  Model model = Model::init(cfg, store.vocab().arch, store.vocab().opt);
  // a non-trivial prior and condition columns, so present labels would matter
  Rng rng(derive_seed(9, "acceptance/nuisance"));
  for (auto& v : parameter_views(model)) {
    for (double& x : v.values) x += 0.05 * rng.normal();
  }
  size_t sensitive = 0;
  for (const auto& rec : store.records()) {
    FunctionRecord stripped = rec;
    stripped.architecture.clear();
    stripped.optimization.clear();
    stripped.library.clear();
    stripped.source_path.clear();
    stripped.name_raw = stripped.name_norm = "anonymous";
    const Eigen::VectorXd with_meta = infer_encoding(model, rec);
    c.expect(with_meta == infer_encoding(model, stripped), "record " + rec.id + " vs stripped copy");
    c.expect(with_meta == infer_encoding(model, rec.instruction_sequence), "record " + rec.id + " vs raw text");
    const auto seq = model.backend.tokenize(rec.instruction_sequence);
    const auto zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.latent_dim()));
    const auto absent = forward_side(model, seq, model.absent_conditions(), zero);
    c.expect(with_meta == absent.z, "record " + rec.id + " vs training path with absent labels");
    const auto labelled = forward_side(model, seq, model.conditions_for(rec.meta()), zero);
    if (labelled.z != absent.z) ++sensitive;
  }
  c.expect(sensitive == store.size(), "condition labels must change training-path encodings");
  return c.outcome(std::to_string(store.size()) + " fixture records bitwise identical with and without metadata; " +
                   std::to_string(sensitive) + " differ when labels are fed to the training path");
}

Outcome split_contracts() {
  Checker c;
  Rng rng(derive_seed(6, "acceptance/splits"));
  const std::vector<std::string> archs{"ARM", "AMD64", "x86", "MIPS", "PowerPC"};
  const std::vector<std::string> libs{"busybox", "OpenSSL", "sqlite3", "putty", "coreutils", "curl", "magick"};
  const std::vector<std::string> opts{"O0", "O1", "O2", "O3"};
  size_t manifests = 0;
  for (int t = 0; t < 100; ++t) {
    CorpusStore store;
    const size_t n_names = 3 + rng.below(6);
    for (size_t f = 0; f < n_names; ++f) {
      for (const auto& lib : libs) {
        for (const auto& arch : archs) {
          if (rng.uniform() < 0.3) continue;
          const std::string opt = opts[rng.below(opts.size())];
          auto r = clonesearch::testing::make_record(lib + "_f" + std::to_string(f), arch, opt, lib, rng.next(), 5);
          store.add(std::move(r));
        }
      }
    }
    SplitConfig cfg;
    cfg.seed = rng.next();
    // pair counts are even by contract
    cfg.train_pairs = 2 * (10 + rng.below(30));
    cfg.test_pairs = 2 * (5 + rng.below(21));
    std::vector<SplitManifest> splits;
    try {
      splits = build_splits(store, cfg);
    } catch (const Error& e) {
      c.expect(false, std::string("build_splits: ") + e.what());
      continue;
    }
    for (const auto& s : splits) {
      ++manifests;
      const long pos = static_cast<long>(s.count_label(1)), neg = static_cast<long>(s.count_label(0));
      c.expect(std::abs(pos - neg) <= 1, s.name + " balance");
      if (s.name == kSplitOodArchLibs) {
        for (const auto& p : s.pairs) {
          for (const auto* m : {&p.left_meta, &p.right_meta}) {
            c.expect(!cfg.train_archs.count(m->architecture) && !cfg.train_libs.count(m->library),
                     "OOD-ARCH&LIBS member from the training sets");
          }
        }
      }
      if (s.name != kSplitOodArch && s.name != kSplitOodLibs) continue;
      const auto same = filter_pairs(s, SubCriterion::kSameArch);
      const auto diff = filter_pairs(s, SubCriterion::kDiffArch);
      c.expect(same.size() + diff.size() == s.pairs.size(), s.name + " sameA + diffA size");
      size_t i = 0, j = 0;
      bool partition = true;
      for (const auto& p : s.pairs) {
        const bool is_same = p.left_meta.architecture == p.right_meta.architecture;
        if (is_same) {
          partition &= i < same.size() && same[i++] == p;
        } else {
          partition &= j < diff.size() && diff[j++] == p;
        }
      }
      c.expect(partition, s.name + " sameA / diffA partition");
      for (auto crit : {SubCriterion::kSameArch, SubCriterion::kDiffArch}) {
        const auto kept = filter_pairs(s, crit);
        const bool both = std::any_of(kept.begin(), kept.end(), [](const auto& p) { return p.label == 1; }) &&
                          std::any_of(kept.begin(), kept.end(), [](const auto& p) { return p.label == 0; });
        if (!both) continue;
        const auto sub = subfilter(s, crit);
        ++manifests;
        c.expect(sub.count_label(1) == sub.count_label(0), sub.name + " balance");
      }
    }
  }
  return c.outcome("100 random corpora, " + std::to_string(manifests) + " manifests");
}

struct Variant {
  std::string name;
  bool removal;
  bool cvib;
};

TrainConfig experiment_config(uint64_t seed, const Variant& v) {
  TrainConfig cfg;
  cfg.dim = 64;
  cfg.max_length = 256;
  cfg.k = 128;
  cfg.latent_dim = 64;
  cfg.freeze_embedder = false;
  cfg.posterior_log_sigma_init = -3.0;
  cfg.epochs = 20;
  cfg.seed = seed;
  cfg.enable_removal = v.removal;
  cfg.enable_cvib = v.cvib;
  return cfg;
}

Outcome synthetic_experiment() {
  const std::vector<Variant> variants{{"full", true, true}, {"-CVIB", true, false}, {"-Removal-CVIB", false, false}};
  std::vector<std::vector<double>> auc(3);
  std::ostringstream per_seed;
  size_t ordered = 0;
  double full_sum = 0.0;
  size_t full_pass = 0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    SyntheticSpec spec = SyntheticSpec::defaults();
    spec.seed = seed;
    const CorpusStore corpus = synthetic_corpus(spec);
    const auto splits =
        build_splits(corpus, clonesearch::testing::synthetic_split_config(seed, 2000, 500));
    const SplitManifest& held_out = splits.at(3);
    per_seed << (seed ? "; " : "") << "seed " << seed << ":";
    for (size_t v = 0; v < variants.size(); ++v) {
      const auto res = train(experiment_config(seed, variants[v]), splits.at(0), corpus);
      const double a = evaluate(res.model, held_out, corpus).auc;
      auc[seed].push_back(a);
      per_seed << " " << variants[v].name << "=" << fmt(a);
    }
    if (auc[seed][0] >= auc[seed][1] && auc[seed][1] >= auc[seed][2]) ++ordered;
    full_sum += auc[seed][0];
    if (auc[seed][0] >= 0.85) ++full_pass;
  }
  const double full_mean = full_sum / 3.0;
  const bool a_ok = full_mean >= 0.85;
  const bool b_ok = ordered >= 2;
  Outcome o;
  o.pass = a_ok && b_ok;
  o.gated_pass = a_ok;
  o.detail = "(a) held-out AUC of the full model, mean " + fmt(full_mean) + " (" + std::to_string(full_pass) +
             "/3 seeds >= 0.85): " + (a_ok ? "PASS" : "FAIL") + "; (b) full >= -CVIB >= -Removal-CVIB in " +
             std::to_string(ordered) + "/3 seeds: " + (b_ok ? "PASS" : "FAIL, reported only") + " [" +
             per_seed.str() + "]";
  return o;
}

std::string telemetry_text(const TrainResult& r, const TrainConfig& cfg) {
  std::string out;
  for (const auto& t : r.telemetry) out += telemetry_json(t, cfg).dump() + "\n";
  return out;
}

Outcome determinism_roundtrips() {
  Checker c;
  const fs::path work = clonesearch::testing::temp_dir("acceptance_determinism");
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_base_functions = 24;
  spec.seed = 11;
  const CorpusStore corpus = synthetic_corpus(spec);
  c.expect(corpus == synthetic_corpus(spec), "synthetic corpus twice");
  const auto split_cfg = clonesearch::testing::synthetic_split_config(11, 300, 120);
  const auto splits = build_splits(corpus, split_cfg);
  const auto splits2 = build_splits(corpus, split_cfg);
  for (size_t i = 0; i < splits.size(); ++i) {
    c.expect(split_to_json(splits[i]) == split_to_json(splits2[i]), "split manifest " + splits[i].name);
  }

  TrainConfig cfg;
  cfg.dim = 32;
  cfg.max_length = 128;
  cfg.k = 64;
  cfg.latent_dim = 16;
  cfg.freeze_embedder = false;
  cfg.epochs = 3;
  cfg.seed = 11;
  const auto r1 = train(cfg, splits[0], corpus);
  const auto r2 = train(cfg, splits[0], corpus);
  c.expect(telemetry_text(r1, cfg) == telemetry_text(r2, cfg), "telemetry streams");
  save_checkpoint(r1.model, work / "ck1");
  save_checkpoint(r2.model, work / "ck2");
  c.expect(read_file(work / "ck1" / "params.bin") == read_file(work / "ck2" / "params.bin"), "checkpoint params");
  c.expect(read_file(work / "ck1" / "manifest.json") == read_file(work / "ck2" / "manifest.json"), "checkpoint manifest");
  const Model loaded = load_checkpoint(work / "ck1");
  size_t probes = 0;
  for (size_t i = 0; i < corpus.size(); i += 9, ++probes) {
    const auto& rec = corpus.records()[i];
    const auto z = infer_encoding(r1.model, rec);
    c.expect(z == infer_encoding(r2.model, rec), "probe output across runs");
    c.expect(z == infer_encoding(loaded, rec), "probe output after checkpoint load");
  }
  c.expect(model_fingerprint(loaded) == model_fingerprint(r1.model), "checkpoint fingerprint");

  const auto rep1 = evaluate(r1.model, splits[3], corpus).to_json().dump();
  const auto rep2 = evaluate(loaded, splits[3], corpus).to_json().dump();
  c.expect(rep1 == rep2, "reports");

  const auto idx1 = build_index(r1.model, corpus.records());
  const auto idx2 = build_index(r2.model, corpus.records());
  c.expect(idx1 == idx2, "indices across runs");
  save_index(idx1, work / "idx1");
  save_index(idx2, work / "idx2");
  for (const char* f : {"manifest.json", "vectors.f32", "ids.jsonl"}) {
    c.expect(read_file(work / "idx1" / f) == read_file(work / "idx2" / f), std::string("index file ") + f);
  }
  c.expect(load_index(work / "idx1") == idx1, "index round-trip");

  save_corpus(corpus, work / "corpus.jsonl");
  c.expect(load_corpus(work / "corpus.jsonl") == corpus, "corpus round-trip");
  save_corpus(load_corpus(work / "corpus.jsonl"), work / "corpus2.jsonl");
  c.expect(read_file(work / "corpus.jsonl") == read_file(work / "corpus2.jsonl"), "corpus bytes after round-trip");
  fs::remove_all(work);
  return c.outcome(std::to_string(probes) + " probe records, " + std::to_string(corpus.size()) +
                   " corpus records, telemetry/checkpoint/report/index compared bytewise");
}

Outcome defaults_fidelity() {
  Checker c;
  const TrainConfig defaults;
  c.expect(defaults.beta1 == 0.05, "beta1 default");
  std::vector<double> s{0.9, 0.2, 0.6, 0.4};
  std::vector<int> y{1, 0, 1, 0};
  TrainConfig cfg;
  cfg.seed = 21;
  const auto report = metrics_from_scores("OOD-ARCH", s, y, cfg).to_json();
  bool valid = true;
  try {
    validate_report_json(report);
  } catch (const Error&) {
    valid = false;
  }
  c.expect(valid, "report validates");
  for (const char* field : {"beta1", "beta2", "tau", "seed", "backend"}) {
    c.expect(report.contains("config") && report["config"].contains(field), std::string("echo of ") + field);
  }
  c.expect(report["config"].value("beta1", -1.0) == 0.05, "echoed beta1 value");
  for (const auto& field : required_echo_fields()) {
    auto broken = report;
    broken["config"].erase(field);
    bool rejected = false;
    try {
      validate_report_json(broken);
    } catch (const Error&) {
      rejected = true;
    }
    c.expect(rejected, "report without " + field + " is rejected");
  }
  return c.outcome("beta1 = " + fmt(defaults.beta1, 2) + "; report echoes " +
                   std::to_string(required_echo_fields().size()) + " config fields");
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

// Optional arguments restrict the run to the listed criterion numbers.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> criteria{
      {1, "metric oracle equivalence", 10, metric_oracles},
      {2, "loss identities", 5, loss_identities},
      {3, "gradient checks", 60, gradient_checks},
      {4, "removal contracts", 30, removal_contracts},
      {5, "nuisance-blindness", 10, nuisance_blindness},
      {6, "split contracts", 30, split_contracts},
      {7, "directional synthetic OOD experiment", 900, synthetic_experiment},
      {8, "determinism and round-trips", 60, determinism_roundtrips},
      {9, "defaults fidelity", 1, defaults_fidelity},
  };
  bool gated_ok = true;
  size_t passed = 0;
  size_t ran = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o.pass = o.gated_pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= cr.budget_s;
    const bool pass = o.pass && in_budget;
    passed += pass;
    gated_ok &= o.gated_pass && in_budget;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << cr.id << " (" << cr.name << ") " << fmt(secs, 2)
              << "s of " << fmt(cr.budget_s, 0) << "s: " << o.detail << (in_budget ? "" : " [over budget]") << "\n"
              << std::flush;
  }
  std::cout << passed << "/" << ran << " criteria pass; gated checks "
            << (gated_ok ? "all pass" : "FAILED") << "\n";
  return gated_ok ? 0 : 1;
}
