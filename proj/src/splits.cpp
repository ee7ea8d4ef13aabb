#include "clonesearch/splits.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_set>

#include "clonesearch/util.hpp"
#include "json.hpp"

namespace clonesearch {

using nlohmann::json;

size_t SplitManifest::count_label(int label) const {
  return static_cast<size_t>(
      std::count_if(pairs.begin(), pairs.end(), [label](const PairSample& p) { return p.label == label; }));
}

namespace {

// Records laid out so that every name group is a contiguous run inside its
// pool (a pool is the whole input, or one architecture when pairs may not mix
// architectures).
struct PairUniverse {
  std::vector<const FunctionRecord*> order;
  struct Group {
    size_t begin, end;            // into order
    size_t pool_begin, pool_end;  // into order
  };
  std::vector<Group> groups;
  std::vector<size_t> group_of;  // per position in order

  uint64_t positive_count() const {
    uint64_t n = 0;
    for (const auto& g : groups) {
      uint64_t s = g.end - g.begin;
      n += s * (s - 1) / 2;
    }
    return n;
  }
};

PairUniverse make_universe(const std::vector<const FunctionRecord*>& records, bool allow_mixed_arch) {
  std::map<std::string, std::map<std::string, std::vector<const FunctionRecord*>>> pools;
  for (const FunctionRecord* r : records) {
    const std::string pool_key = allow_mixed_arch ? std::string() : r->architecture;
    pools[pool_key][r->name_norm].push_back(r);
  }
  PairUniverse u;
  for (auto& [pool_key, by_name] : pools) {
    size_t pool_begin = u.order.size();
    size_t first_group = u.groups.size();
    for (auto& [name, members] : by_name) {
      size_t begin = u.order.size();
      for (const FunctionRecord* r : members) {
        u.order.push_back(r);
        u.group_of.push_back(u.groups.size());
      }
      u.groups.push_back({begin, u.order.size(), 0, 0});
    }
    for (size_t g = first_group; g < u.groups.size(); ++g) {
      u.groups[g].pool_begin = pool_begin;
      u.groups[g].pool_end = u.order.size();
    }
  }
  return u;
}

size_t pick_weighted(const std::vector<uint64_t>& cumulative, Rng& rng) {
  uint64_t r = rng.below(cumulative.back());
  return static_cast<size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
}

PairSample make_pair(const FunctionRecord* a, const FunctionRecord* b, Rng& rng) {
  if (rng.below(2) == 1) std::swap(a, b);
  PairSample p;
  p.left_id = a->id;
  p.right_id = b->id;
  p.label = a->name_norm == b->name_norm ? 1 : 0;
  p.left_meta = a->meta();
  p.right_meta = b->meta();
  return p;
}

std::string canonical_key(const FunctionRecord* a, const FunctionRecord* b) {
  return a->id < b->id ? a->id + '|' + b->id : b->id + '|' + a->id;
}

}  // namespace

std::vector<PairSample> generate_pairs(const std::vector<const FunctionRecord*>& records, size_t n_pairs,
                                       uint64_t seed, const PairOptions& options) {
  if (n_pairs % 2 != 0) throw domain_error("generate_pairs: n_pairs must be even");
  if (n_pairs == 0) return {};
  PairUniverse u = make_universe(records, options.allow_mixed_arch);

  std::vector<uint64_t> pos_cum, neg_cum;
  uint64_t acc = 0;
  for (const auto& g : u.groups) {
    uint64_t s = g.end - g.begin;
    acc += s * (s - 1) / 2;
    pos_cum.push_back(acc);
  }
  const uint64_t n_positive = acc;
  acc = 0;
  for (size_t i = 0; i < u.order.size(); ++i) {
    const auto& g = u.groups[u.group_of[i]];
    acc += (g.pool_end - g.pool_begin) - (g.end - g.begin);
    neg_cum.push_back(acc);
  }
  const uint64_t n_negative = acc / 2;
  if (n_positive == 0) throw domain_error("generate_pairs: no name has two or more records, cannot balance labels");
  if (n_negative == 0) throw domain_error("generate_pairs: fewer than two distinct names, cannot balance labels");

  Rng rng(seed);
  const size_t half = n_pairs / 2;
  std::vector<PairSample> pairs;
  pairs.reserve(n_pairs);

  // Distinct pairs while the candidate pool allows it, otherwise with replacement.
  std::unordered_set<std::string> used;
  const bool distinct_pos = half <= n_positive;
  for (size_t i = 0; i < half;) {
    const auto& g = u.groups[pick_weighted(pos_cum, rng)];
    size_t s = g.end - g.begin;
    size_t x = rng.below(s);
    size_t y = rng.below(s - 1);
    if (y >= x) ++y;
    const FunctionRecord* a = u.order[g.begin + x];
    const FunctionRecord* b = u.order[g.begin + y];
    if (distinct_pos && !used.insert(canonical_key(a, b)).second) continue;
    pairs.push_back(make_pair(a, b, rng));
    ++i;
  }
  const bool distinct_neg = half <= n_negative;
  for (size_t i = 0; i < half;) {
    size_t ai = pick_weighted(neg_cum, rng);
    const auto& g = u.groups[u.group_of[ai]];
    size_t others = (g.pool_end - g.pool_begin) - (g.end - g.begin);
    size_t j = g.pool_begin + rng.below(others);
    if (j >= g.begin) j += g.end - g.begin;
    const FunctionRecord* a = u.order[ai];
    const FunctionRecord* b = u.order[j];
    if (distinct_neg && !used.insert(canonical_key(a, b)).second) continue;
    pairs.push_back(make_pair(a, b, rng));
    ++i;
  }
  rng.shuffle(pairs);
  return pairs;
}

std::vector<SplitManifest> build_splits(const CorpusStore& store, const SplitConfig& cfg) {
  auto overlaps = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::any_of(a.begin(), a.end(), [&](const std::string& s) { return b.count(s) > 0; });
  };
  if (overlaps(cfg.train_archs, cfg.ood_archs)) throw config_error("training and OOD architecture sets overlap");
  if (overlaps(cfg.train_libs, cfg.ood_libs)) throw config_error("training and OOD library sets overlap");

  struct Cell {
    const char* name;
    const std::set<std::string>* archs;
    const std::set<std::string>* libs;
    size_t n_pairs;
  };
  const Cell cells[] = {
      {kSplitTrain, &cfg.train_archs, &cfg.train_libs, cfg.train_pairs},
      {kSplitOodArch, &cfg.ood_archs, &cfg.train_libs, cfg.test_pairs},
      {kSplitOodLibs, &cfg.train_archs, &cfg.ood_libs, cfg.test_pairs},
      {kSplitOodArchLibs, &cfg.ood_archs, &cfg.ood_libs, cfg.test_pairs},
  };

  std::vector<SplitManifest> out;
  for (const Cell& cell : cells) {
    std::vector<const FunctionRecord*> members;
    for (const auto& r : store.records()) {
      if (cell.archs->count(r.architecture) && cell.libs->count(r.library)) members.push_back(&r);
    }
    if (members.empty()) throw domain_error(std::string("split ") + cell.name + " has no records");
    SplitManifest m;
    m.name = cell.name;
    m.arch_set = *cell.archs;
    m.lib_set = *cell.libs;
    m.seed = derive_seed(cfg.seed, std::string("pairs/") + cell.name);
    PairOptions opts;
    opts.allow_mixed_arch = cell.name != std::string(kSplitTrain) || cfg.allow_mixed_arch_train;
    try {
      m.pairs = generate_pairs(members, cell.n_pairs, m.seed, opts);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("split ") + cell.name + ": " + e.what());
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string to_string(SubCriterion c) {
  switch (c) {
    case SubCriterion::kSameArch: return "sameA";
    case SubCriterion::kDiffArch: return "diffA";
    case SubCriterion::kSameOpt: return "sameO";
    case SubCriterion::kDiffOpt: return "diffO";
  }
  return "?";
}

SubCriterion sub_criterion_from_string(const std::string& s) {
  if (s == "sameA") return SubCriterion::kSameArch;
  if (s == "diffA") return SubCriterion::kDiffArch;
  if (s == "sameO") return SubCriterion::kSameOpt;
  if (s == "diffO") return SubCriterion::kDiffOpt;
  throw config_error("unknown sub-split criterion '" + s + "'");
}

std::vector<PairSample> filter_pairs(const SplitManifest& split, SubCriterion criterion) {
  std::vector<PairSample> kept;
  for (const auto& p : split.pairs) {
    bool same_arch = p.left_meta.architecture == p.right_meta.architecture;
    bool same_opt = p.left_meta.optimization == p.right_meta.optimization;
    bool keep = false;
    switch (criterion) {
      case SubCriterion::kSameArch: keep = same_arch; break;
      case SubCriterion::kDiffArch: keep = !same_arch; break;
      case SubCriterion::kSameOpt: keep = same_opt; break;
      case SubCriterion::kDiffOpt: keep = !same_opt; break;
    }
    if (keep) kept.push_back(p);
  }
  return kept;
}

SplitManifest subfilter(const SplitManifest& split, SubCriterion criterion) {
  if (split.name != kSplitOodArch && split.name != kSplitOodLibs) {
    throw domain_error("subfilter applies to OOD-ARCH or OOD-LIBS, not " + split.name);
  }
  std::vector<PairSample> kept = filter_pairs(split, criterion);
  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < kept.size(); ++i) (kept[i].label == 1 ? pos : neg).push_back(i);
  const size_t target = std::min(pos.size(), neg.size());
  if (target == 0) {
    throw domain_error("subfilter " + split.name + "-" + to_string(criterion) + " leaves no balanced pairs");
  }
  Rng rng(derive_seed(split.seed, "subfilter/" + to_string(criterion)));
  std::vector<size_t>& majority = pos.size() > neg.size() ? pos : neg;
  rng.shuffle(majority);
  majority.resize(target);
  std::vector<size_t> keep_idx = pos;
  keep_idx.insert(keep_idx.end(), neg.begin(), neg.end());
  std::sort(keep_idx.begin(), keep_idx.end());

  SplitManifest out;
  out.name = split.name + "-" + to_string(criterion);
  out.arch_set = split.arch_set;
  out.lib_set = split.lib_set;
  out.seed = split.seed;
  for (size_t i : keep_idx) out.pairs.push_back(kept[i]);
  return out;
}

namespace {

json meta_to_json(const FunctionMeta& m) {
  return {{"library", m.library}, {"architecture", m.architecture}, {"optimization", m.optimization}};
}

FunctionMeta meta_from_json(const json& j) {
  return {j.at("library").get<std::string>(), j.at("architecture").get<std::string>(),
          j.at("optimization").get<std::string>()};
}

}  // namespace

std::string split_to_json(const SplitManifest& split) {
  json pairs = json::array();
  for (const auto& p : split.pairs) {
    pairs.push_back({{"left", p.left_id},
                     {"right", p.right_id},
                     {"label", p.label},
                     {"left_meta", meta_to_json(p.left_meta)},
                     {"right_meta", meta_to_json(p.right_meta)}});
  }
  json j = {{"name", split.name},
            {"seed", split.seed},
            {"arch_set", split.arch_set},
            {"lib_set", split.lib_set},
            {"pairs", std::move(pairs)}};
  return j.dump(1);
}

SplitManifest split_from_json(std::string_view text) {
  SplitManifest m;
  try {
    json j = json::parse(text);
    m.name = j.at("name").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.arch_set = j.at("arch_set").get<std::set<std::string>>();
    m.lib_set = j.at("lib_set").get<std::set<std::string>>();
    for (const auto& jp : j.at("pairs")) {
      PairSample p;
      p.left_id = jp.at("left").get<std::string>();
      p.right_id = jp.at("right").get<std::string>();
      p.label = jp.at("label").get<int>();
      if (p.label != 0 && p.label != 1) throw parse_error("pair label must be 0 or 1");
      if (jp.contains("left_meta")) p.left_meta = meta_from_json(jp["left_meta"]);
      if (jp.contains("right_meta")) p.right_meta = meta_from_json(jp["right_meta"]);
      m.pairs.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw parse_error(std::string("split manifest: ") + e.what());
  }
  return m;
}

void save_split(const SplitManifest& split, const std::filesystem::path& path) {
  write_file(path, split_to_json(split) + "\n");
}

SplitManifest load_split(const std::filesystem::path& path) { return split_from_json(read_file(path)); }

std::string split_file_stem(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '&', '_');
  return s;
}

}  // namespace clonesearch
