#include "clonesearch/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "clonesearch/util.hpp"
#include "json.hpp"

namespace clonesearch {

using nlohmann::json;

Vocabularies Vocabularies::defaults() {
  return {{"ARM", "AMD64", "x86", "MIPS", "PowerPC"}, {"O0", "O1", "O2", "O3"}, {}};
}

namespace {

std::optional<size_t> index_of(const std::vector<std::string>& v, std::string_view tag) {
  auto it = std::find(v.begin(), v.end(), tag);
  if (it == v.end()) return std::nullopt;
  return static_cast<size_t>(it - v.begin());
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::optional<size_t> Vocabularies::arch_index(std::string_view tag) const { return index_of(arch, tag); }
std::optional<size_t> Vocabularies::opt_index(std::string_view tag) const { return index_of(opt, tag); }
bool Vocabularies::has_lib(std::string_view tag) const { return index_of(lib, tag).has_value(); }

std::string normalize_name(std::string_view raw, const NameRules& rules) {
  std::vector<std::regex> patterns;
  patterns.reserve(rules.suffix_patterns.size());
  for (const auto& p : rules.suffix_patterns) patterns.emplace_back(p);

  std::string s(raw);
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    if (rules.strip_leading_underscores) {
      size_t n = s.find_first_not_of('_');
      if (n == std::string::npos) n = s.size();
      if (n > 0) {
        s.erase(0, n);
        changed = true;
      }
    }
    for (const auto& re : patterns) {
      std::string next = std::regex_replace(s, re, "");
      if (next != s) {
        s = std::move(next);
        changed = true;
      }
    }
  }
  // a name made only of strippable parts keeps its raw spelling
  if (s.empty()) return std::string(raw);
  return s;
}

std::string file2ins(std::span<const Block> blocks) {
  if (blocks.empty()) throw domain_error("file2ins: empty block list");
  std::vector<const Block*> order;
  order.reserve(blocks.size());
  for (const auto& b : blocks) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(), [](const Block* a, const Block* b) {
    if (a->call_order != b->call_order) return a->call_order < b->call_order;
    return a->address < b->address;
  });
  std::string out;
  for (const Block* b : order) {
    for (const auto& ins : b->instructions) {
      if (!out.empty()) out.push_back(' ');
      out += ins;
    }
  }
  return out;
}

void CorpusStore::add(FunctionRecord record) {
  if (by_id_.count(record.id)) throw Error("corpus", "duplicate record id " + record.id);
  if (!vocab_.arch_index(record.architecture)) {
    throw vocabulary_error("unknown architecture tag '" + record.architecture + "'");
  }
  if (!vocab_.opt_index(record.optimization)) {
    throw vocabulary_error("unknown optimization tag '" + record.optimization + "'");
  }
  if (record.library.empty()) throw vocabulary_error("empty library tag");
  if (!vocab_.has_lib(record.library)) vocab_.lib.push_back(record.library);
  by_id_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const FunctionRecord* CorpusStore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return nullptr;
  return &records_[it->second];
}

const FunctionRecord& CorpusStore::get(std::string_view id) const {
  const FunctionRecord* r = find(id);
  if (r == nullptr) throw Error("corpus", "unknown record id " + std::string(id));
  return *r;
}

std::vector<ExportFunction> parse_export_text(std::string_view text, std::string_view source_label) {
  std::vector<ExportFunction> out;
  size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    std::string where = std::string(source_label) + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("name") || !obj["name"].is_string()) {
      throw parse_error(where + ": function object needs a string 'name'");
    }
    ExportFunction fn;
    fn.name = obj["name"].get<std::string>();
    std::string fn_label = where + " function '" + fn.name + "'";
    if (fn.name.empty()) throw parse_error(fn_label + ": empty name");
    if (!obj.contains("path") || !obj["path"].is_string()) {
      throw parse_error(fn_label + ": missing string 'path'");
    }
    fn.path = obj["path"].get<std::string>();
    if (!obj.contains("blocks") || !obj["blocks"].is_array()) {
      throw parse_error(fn_label + ": missing array 'blocks'");
    }
    std::set<uint32_t> seen_orders;
    for (const auto& jb : obj["blocks"]) {
      if (!jb.is_object() || !jb.contains("addr") || !jb["addr"].is_number_unsigned() ||
          !jb.contains("call_order") || !jb["call_order"].is_number_unsigned() ||
          !jb.contains("ins") || !jb["ins"].is_array()) {
        throw parse_error(fn_label + ": block needs unsigned 'addr', 'call_order' and array 'ins'");
      }
      Block b;
      b.address = jb["addr"].get<uint64_t>();
      uint64_t order = jb["call_order"].get<uint64_t>();
      if (order > UINT32_MAX) throw parse_error(fn_label + ": call_order out of range");
      b.call_order = static_cast<uint32_t>(order);
      if (!seen_orders.insert(b.call_order).second) {
        throw parse_error(fn_label + ": duplicate call_order " + std::to_string(order));
      }
      for (const auto& ins : jb["ins"]) {
        if (!ins.is_string()) throw parse_error(fn_label + ": instruction is not a string");
        std::string s = collapse_whitespace(ins.get<std::string>());
        if (!s.empty()) b.instructions.push_back(std::move(s));
      }
      if (b.instructions.empty()) throw parse_error(fn_label + ": block with no instructions");
      fn.blocks.push_back(std::move(b));
    }
    out.push_back(std::move(fn));
  }
  return out;
}

IngestResult ingest_export_text(std::string_view text, std::string_view source_label,
                                const FunctionMeta& meta, const Vocabularies& vocab,
                                const IngestOptions& options) {
  if (!vocab.arch_index(meta.architecture)) {
    throw vocabulary_error("unknown architecture tag '" + meta.architecture + "'");
  }
  if (!vocab.opt_index(meta.optimization)) {
    throw vocabulary_error("unknown optimization tag '" + meta.optimization + "'");
  }
  if (meta.library.empty()) throw vocabulary_error("empty library tag");

  IngestResult result;
  std::map<std::pair<std::string, std::string>, size_t> seen;
  for (auto& fn : parse_export_text(text, source_label)) {
    size_t ordinal = seen[{fn.path, fn.name}]++;
    if (options.dedupe && ordinal > 0) {
      ++result.skipped_duplicate;
      continue;
    }
    if (fn.blocks.size() < options.min_blocks) {
      ++result.skipped_small;
      continue;
    }
    FunctionRecord r;
    r.source_path = fn.path;
    r.library = meta.library;
    r.architecture = meta.architecture;
    r.optimization = meta.optimization;
    r.name_raw = fn.name;
    r.name_norm = normalize_name(fn.name, options.name_rules);
    r.instruction_sequence = file2ins(fn.blocks);
    r.blocks = std::move(fn.blocks);
    std::string key = r.library + '\0' + r.architecture + '\0' + r.optimization + '\0' +
                      r.source_path + '\0' + r.name_raw + '\0' + std::to_string(ordinal);
    r.id = hex64(fnv1a64(key));
    result.records.push_back(std::move(r));
  }
  return result;
}

IngestResult ingest_export(const std::filesystem::path& path, const FunctionMeta& meta,
                           const Vocabularies& vocab, const IngestOptions& options) {
  std::string text = read_file_maybe_gz(path);
  return ingest_export_text(text, path.filename().string(), meta, vocab, options);
}

namespace {

json record_to_json(const FunctionRecord& r) {
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"addr", b.address}, {"call_order", b.call_order}, {"ins", b.instructions}});
  }
  return {{"id", r.id},
          {"source_path", r.source_path},
          {"library", r.library},
          {"architecture", r.architecture},
          {"optimization", r.optimization},
          {"name_raw", r.name_raw},
          {"name_norm", r.name_norm},
          {"blocks", std::move(blocks)},
          {"instruction_sequence", r.instruction_sequence}};
}

FunctionRecord record_from_json(const json& j) {
  FunctionRecord r;
  r.id = j.at("id").get<std::string>();
  r.source_path = j.at("source_path").get<std::string>();
  r.library = j.at("library").get<std::string>();
  r.architecture = j.at("architecture").get<std::string>();
  r.optimization = j.at("optimization").get<std::string>();
  r.name_raw = j.at("name_raw").get<std::string>();
  r.name_norm = j.at("name_norm").get<std::string>();
  for (const auto& jb : j.at("blocks")) {
    Block b;
    b.address = jb.at("addr").get<uint64_t>();
    b.call_order = jb.at("call_order").get<uint32_t>();
    b.instructions = jb.at("ins").get<std::vector<std::string>>();
    r.blocks.push_back(std::move(b));
  }
  r.instruction_sequence = j.at("instruction_sequence").get<std::string>();
  return r;
}

}  // namespace

void save_corpus(const CorpusStore& store, const std::filesystem::path& path) {
  std::string out;
  json header = {{"format", kCorpusFormat},
                 {"version", kCorpusVersion},
                 {"arch_vocab", store.vocab().arch},
                 {"opt_vocab", store.vocab().opt},
                 {"lib_vocab", store.vocab().lib}};
  out += header.dump();
  out.push_back('\n');
  for (const auto& r : store.records()) {
    out += record_to_json(r).dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

CorpusStore load_corpus(const std::filesystem::path& path) {
  std::string text = read_file_maybe_gz(path);
  auto lines = split_lines(text);
  if (lines.empty()) throw parse_error(path.string() + ": empty corpus file");
  json header;
  try {
    header = json::parse(lines[0]);
  } catch (const json::exception& e) {
    throw parse_error(path.string() + ": bad corpus header: " + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kCorpusFormat) {
    throw Error("incompatible", path.string() + ": not a corpus file");
  }
  if (!header.contains("version") || header["version"] != kCorpusVersion) {
    throw Error("incompatible", path.string() + ": unsupported corpus version " +
                                    (header.contains("version") ? header["version"].dump() : "<none>"));
  }
  Vocabularies vocab;
  try {
    vocab.arch = header.at("arch_vocab").get<std::vector<std::string>>();
    vocab.opt = header.at("opt_vocab").get<std::vector<std::string>>();
    vocab.lib = header.at("lib_vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw parse_error(path.string() + ": bad vocabularies in header: " + e.what());
  }
  CorpusStore store(vocab);
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    FunctionRecord r;
    try {
      r = record_from_json(json::parse(lines[i]));
    } catch (const json::exception& e) {
      throw parse_error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    if (r.blocks.size() < kMinBlocks) {
      throw parse_error("record " + r.id + " has fewer than " + std::to_string(kMinBlocks) + " blocks");
    }
    if (file2ins(r.blocks) != r.instruction_sequence) {
      throw parse_error("record " + r.id + ": instruction_sequence does not match its blocks");
    }
    if (!vocab.has_lib(r.library)) {
      throw vocabulary_error("record " + r.id + ": library '" + r.library + "' not in header vocabulary");
    }
    store.add(std::move(r));
  }
  return store;
}

}  // namespace clonesearch
