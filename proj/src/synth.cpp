#include "clonesearch/synth.hpp"

#include <set>

#include "clonesearch/corpus.hpp"
#include "clonesearch/util.hpp"

namespace clonesearch {

using nlohmann::json;

namespace {

Error spec_error(const std::string& m) { return Error("spec", m); }

// Cycles over a few entries of an alphabet: a partial permutation.
std::map<std::string, std::string> cycle(const std::vector<std::string>& items) {
  std::map<std::string, std::string> m;
  for (size_t i = 0; i < items.size(); ++i) m[items[i]] = items[(i + 1) % items.size()];
  return m;
}

void check_bijection(const std::map<std::string, std::string>& map, const std::vector<std::string>& alphabet,
                     const std::string& what) {
  std::set<std::string> alpha(alphabet.begin(), alphabet.end());
  std::set<std::string> keys, values;
  for (const auto& [k, v] : map) {
    if (!alpha.count(k) || !alpha.count(v)) throw spec_error(what + ": '" + k + "' -> '" + v + "' leaves the alphabet");
    keys.insert(k);
    if (!values.insert(v).second) throw spec_error(what + ": two symbols map to '" + v + "'");
  }
  if (keys != values) throw spec_error(what + ": map is not a bijection over the alphabet");
}

struct Instruction {
  std::string mnemonic;
  std::vector<std::string> operands;  // register, immediate, or "[reg+imm]"
};

struct BaseFunction {
  std::string name;
  std::string library;
  std::vector<std::vector<Instruction>> blocks;
};

std::string hex_imm(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  do {
    s.insert(s.begin(), digits[v % 16]);
    v /= 16;
  } while (v);
  return "0x" + s;
}

Instruction parse_instruction(const std::string& text) {
  Instruction ins;
  size_t sp = text.find(' ');
  ins.mnemonic = text.substr(0, sp);
  if (sp == std::string::npos) return ins;
  std::string rest = text.substr(sp + 1);
  size_t start = 0;
  while (start <= rest.size()) {
    size_t comma = rest.find(',', start);
    std::string op = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    size_t b = op.find_first_not_of(' ');
    if (b != std::string::npos) ins.operands.push_back(op.substr(b));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return ins;
}

std::string render(const Instruction& ins, const SynthArchitecture& arch) {
  auto rename = [](const std::map<std::string, std::string>& m, const std::string& s) {
    auto it = m.find(s);
    return it == m.end() ? s : it->second;
  };
  std::string out = rename(arch.mnemonic_map, ins.mnemonic);
  for (size_t i = 0; i < ins.operands.size(); ++i) {
    const std::string& op = ins.operands[i];
    out += i == 0 ? " " : ", ";
    if (op.size() > 2 && op.front() == '[') {
      size_t plus = op.find('+');
      std::string reg = op.substr(1, plus == std::string::npos ? op.size() - 2 : plus - 1);
      out += "[" + rename(arch.register_map, reg) + (plus == std::string::npos ? "]" : op.substr(plus));
    } else {
      out += rename(arch.register_map, op);
    }
  }
  return out;
}

BaseFunction make_base(const SyntheticSpec& spec, size_t index) {
  const size_t per_lib = (spec.n_base_functions + spec.libraries.size() - 1) / spec.libraries.size();
  BaseFunction f;
  f.library = spec.libraries[index / per_lib];
  f.name = f.library + "_fn" + std::to_string(index);
  Rng rng(derive_seed(spec.seed, "synth/base/" + std::to_string(index)));
  const size_t n_blocks = spec.min_blocks + rng.below(spec.max_blocks - spec.min_blocks + 1);
  auto reg = [&] { return spec.registers[rng.below(spec.registers.size())]; };
  for (size_t b = 0; b < n_blocks; ++b) {
    std::vector<Instruction> block;
    const size_t len = spec.min_block_len + rng.below(spec.max_block_len - spec.min_block_len + 1);
    for (size_t i = 0; i < len; ++i) {
      Instruction ins;
      ins.mnemonic = spec.mnemonics[rng.below(spec.mnemonics.size())];
      switch (rng.below(4)) {
        case 0: ins.operands = {reg(), reg()}; break;
        case 1: ins.operands = {reg(), hex_imm(rng.below(256))}; break;
        case 2: ins.operands = {reg(), "[" + reg() + "+" + hex_imm(4 * rng.below(64)) + "]"}; break;
        default: ins.operands = {hex_imm(0x400 + 4 * rng.below(1024))}; break;
      }
      block.push_back(std::move(ins));
    }
    f.blocks.push_back(std::move(block));
  }
  return f;
}

std::string render_variant(const SyntheticSpec& spec, const BaseFunction& f, const SynthArchitecture& arch,
                           const SynthOptimization& opt) {
  Rng rng(derive_seed(spec.seed, "synth/variant/" + f.name + "/" + arch.name + "/" + opt.name));
  std::vector<Instruction> junk;
  for (const auto& j : spec.junk_pool) junk.push_back(parse_instruction(j));

  json blocks = json::array();
  uint64_t address = 0x1000;
  uint32_t call_order = 0;
  auto emit = [&](const std::vector<Instruction>& body) {
    json ins = json::array();
    for (const auto& i : body) {
      ins.push_back(render(i, arch));
      if (!junk.empty() && rng.uniform() < opt.junk_rate) ins.push_back(render(junk[rng.below(junk.size())], arch));
    }
    blocks.push_back({{"addr", address}, {"call_order", call_order++}, {"ins", ins}});
    address += 4 * ins.size();
  };
  for (const auto& body : f.blocks) {
    emit(body);
    if (rng.uniform() < opt.dup_rate) emit(body);
  }
  return json{{"path", f.library + "/" + f.name + ".c"}, {"name", f.name + opt.name_suffix}, {"blocks", blocks}}
      .dump();
}

}  // namespace

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec s;
  s.mnemonics = {"mov", "add", "sub", "mul", "and", "or",   "xor", "shl", "shr", "cmp",
                 "jmp", "jz",  "jnz", "call", "push", "pop", "ld",  "st",  "lea", "test"};
  s.registers = {"r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "r9", "r10", "r11"};
  s.junk_pool = {"nop", "push r11", "pop r11", "mov r10, r10", "xor r9, r9", "lea r8, [r8+0x0]"};
  s.architectures = {
      {"SYN-A", {}, {}},
      {"SYN-B", cycle({"mov", "ld", "st"}), cycle({"r0", "r1", "r2", "r3"})},
      {"SYN-C", cycle({"add", "sub", "xor", "or"}), cycle({"r4", "r5", "r6"})},
      {"SYN-D", cycle({"jz", "jnz", "cmp", "test", "and"}), cycle({"r7", "r8", "r9", "r10", "r11"})},
  };
  s.optimizations = {{"O0", 0.0, 0.0, ""}, {"O1", 0.15, 0.05, ""}, {"O2", 0.3, 0.15, ".isra.0"}};
  return s;
}

void SyntheticSpec::validate() const {
  if (n_base_functions == 0 || libraries.empty()) throw spec_error("need at least one function and library");
  if (architectures.empty() || optimizations.empty()) throw spec_error("need architectures and optimizations");
  if (mnemonics.empty() || registers.empty()) throw spec_error("empty alphabet");
  if (min_blocks == 0 || min_blocks > max_blocks) throw spec_error("bad block count range");
  if (min_block_len == 0 || min_block_len > max_block_len) throw spec_error("bad block length range");
  std::set<std::string> names;
  for (const auto& a : architectures) {
    if (!names.insert(a.name).second) throw spec_error("duplicate architecture " + a.name);
    check_bijection(a.mnemonic_map, mnemonics, a.name + " mnemonic map");
    check_bijection(a.register_map, registers, a.name + " register map");
  }
  for (const auto& o : optimizations) {
    if (o.junk_rate < 0 || o.junk_rate > 1 || o.dup_rate < 0 || o.dup_rate > 1) {
      throw spec_error(o.name + ": rates must lie in [0, 1]");
    }
  }
}

json SyntheticSpec::to_json() const {
  json archs = json::array();
  for (const auto& a : architectures) {
    archs.push_back({{"name", a.name}, {"mnemonic_map", a.mnemonic_map}, {"register_map", a.register_map}});
  }
  json opts = json::array();
  for (const auto& o : optimizations) {
    opts.push_back({{"name", o.name}, {"junk_rate", o.junk_rate}, {"dup_rate", o.dup_rate}, {"name_suffix", o.name_suffix}});
  }
  return {{"n_base_functions", n_base_functions},
          {"libraries", libraries},
          {"mnemonics", mnemonics},
          {"registers", registers},
          {"junk_pool", junk_pool},
          {"architectures", archs},
          {"optimizations", opts},
          {"min_blocks", min_blocks},
          {"max_blocks", max_blocks},
          {"min_block_len", min_block_len},
          {"max_block_len", max_block_len},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  try {
    s.n_base_functions = j.at("n_base_functions").get<size_t>();
    s.libraries = j.at("libraries").get<std::vector<std::string>>();
    s.mnemonics = j.at("mnemonics").get<std::vector<std::string>>();
    s.registers = j.at("registers").get<std::vector<std::string>>();
    s.junk_pool = j.value("junk_pool", std::vector<std::string>{});
    for (const auto& a : j.at("architectures")) {
      s.architectures.push_back({a.at("name").get<std::string>(),
                                 a.value("mnemonic_map", std::map<std::string, std::string>{}),
                                 a.value("register_map", std::map<std::string, std::string>{})});
    }
    for (const auto& o : j.at("optimizations")) {
      s.optimizations.push_back({o.at("name").get<std::string>(), o.value("junk_rate", 0.0), o.value("dup_rate", 0.0),
                                 o.value("name_suffix", std::string{})});
    }
    s.min_blocks = j.value("min_blocks", s.min_blocks);
    s.max_blocks = j.value("max_blocks", s.max_blocks);
    s.min_block_len = j.value("min_block_len", s.min_block_len);
    s.max_block_len = j.value("max_block_len", s.max_block_len);
    s.seed = j.value("seed", uint64_t{0});
  } catch (const json::exception& e) {
    throw spec_error(e.what());
  }
  s.validate();
  return s;
}

json SynthOutput::to_json() const {
  json files_j = json::array();
  for (const auto& f : files) {
    files_j.push_back({{"file", f.file}, {"library", f.library}, {"architecture", f.architecture}, {"optimization", f.optimization}});
  }
  return {{"format", kSynthManifestFormat},
          {"files", files_j},
          {"arch_vocab", arch_vocab},
          {"opt_vocab", opt_vocab},
          {"lib_vocab", lib_vocab}};
}

SynthOutput SynthOutput::from_json(const json& j) {
  if (j.value("format", "") != kSynthManifestFormat) throw manifest_error("not a synthetic corpus manifest");
  SynthOutput out;
  try {
    for (const auto& f : j.at("files")) {
      out.files.push_back({f.at("file"), f.at("library"), f.at("architecture"), f.at("optimization")});
    }
    out.arch_vocab = j.at("arch_vocab").get<std::vector<std::string>>();
    out.opt_vocab = j.at("opt_vocab").get<std::vector<std::string>>();
    out.lib_vocab = j.at("lib_vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw manifest_error(std::string("synthetic manifest: ") + e.what());
  }
  return out;
}

std::map<std::string, std::string> synthesize(const SyntheticSpec& spec, SynthOutput* layout) {
  spec.validate();
  std::vector<BaseFunction> bases;
  for (size_t i = 0; i < spec.n_base_functions; ++i) bases.push_back(make_base(spec, i));

  SynthOutput out;
  for (const auto& a : spec.architectures) out.arch_vocab.push_back(a.name);
  for (const auto& o : spec.optimizations) out.opt_vocab.push_back(o.name);
  std::map<std::string, std::string> files;
  for (const auto& lib : spec.libraries) {
    bool used = false;
    for (const auto& a : spec.architectures) {
      for (const auto& o : spec.optimizations) {
        std::string text;
        for (const auto& f : bases) {
          if (f.library != lib) continue;
          text += render_variant(spec, f, a, o);
          text += '\n';
        }
        if (text.empty()) continue;
        used = true;
        const std::string name = lib + "/" + a.name + "_" + o.name + ".jsonl";
        files[name] = std::move(text);
        out.files.push_back({name, lib, a.name, o.name});
      }
    }
    if (used) out.lib_vocab.push_back(lib);
  }
  if (layout) *layout = std::move(out);
  return files;
}

SynthOutput write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  SynthOutput layout;
  auto files = synthesize(spec, &layout);
  for (const auto& [name, text] : files) write_file(dir / name, text);
  json manifest = layout.to_json();
  manifest["spec"] = spec.to_json();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return layout;
}

CorpusStore synthetic_corpus(const SyntheticSpec& spec, const IngestOptions& options) {
  SynthOutput layout;
  auto files = synthesize(spec, &layout);
  Vocabularies v = Vocabularies::defaults();
  v.arch = layout.arch_vocab;
  v.opt = layout.opt_vocab;
  CorpusStore store(v);
  for (const auto& f : layout.files) {
    auto r = ingest_export_text(files.at(f.file), f.file, {f.library, f.architecture, f.optimization}, store.vocab(),
                                options);
    for (auto& rec : r.records) store.add(std::move(rec));
  }
  return store;
}

}  // namespace clonesearch
