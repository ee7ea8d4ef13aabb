#include "clonesearch/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <functional>
#include <sstream>

#include "clonesearch/util.hpp"

namespace clonesearch {

using nlohmann::json;

void TrainConfig::validate() const {
  if (backend != "compact" && backend != "pretrained-text") throw config_error("unknown backend '" + backend + "'");
  if (backend == "pretrained-text" && weights_dir.empty()) throw config_error("pretrained-text needs weights_dir");
  if (beta1 < 0 || beta2 < 0 || eps_guard < 0) throw config_error("beta1, beta2 and eps_guard must be >= 0");
  if (!(tau > 0.0 && tau < 1.0)) throw config_error("tau must lie in (0, 1)");
  if (backend == "compact" && k > max_length) throw config_error("k must not exceed LS_max");
  if (batch_size == 0) throw config_error("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
  if (optimizer != "sgd" && optimizer != "adam") throw config_error("unknown optimizer '" + optimizer + "'");
}

json TrainConfig::to_json() const {
  return {{"backend", backend},
          {"weights_dir", weights_dir},
          {"dim", dim},
          {"max_length", max_length},
          {"vocab_size", vocab_size},
          {"k", k},
          {"latent_dim", latent_dim},
          {"freeze_embedder", freeze_embedder},
          {"enable_removal", enable_removal},
          {"enable_cvib", enable_cvib},
          {"posterior_log_sigma_init", posterior_log_sigma_init},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps_guard", eps_guard},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"optimizer", optimizer},
          {"tau", tau}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.backend = j.at("backend").get<std::string>();
  c.weights_dir = j.at("weights_dir").get<std::string>();
  c.dim = j.at("dim").get<size_t>();
  c.max_length = j.at("max_length").get<size_t>();
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.k = j.at("k").get<size_t>();
  c.latent_dim = j.at("latent_dim").get<size_t>();
  c.freeze_embedder = j.at("freeze_embedder").get<bool>();
  c.enable_removal = j.at("enable_removal").get<bool>();
  c.enable_cvib = j.at("enable_cvib").get<bool>();
  c.posterior_log_sigma_init = j.at("posterior_log_sigma_init").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps_guard = j.at("eps_guard").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<size_t>();
  c.epochs = j.at("epochs").get<size_t>();
  c.seed = j.at("seed").get<uint64_t>();
  c.optimizer = j.at("optimizer").get<std::string>();
  c.tau = j.at("tau").get<double>();
  return c;
}

namespace {

std::set<std::string> parse_set(const std::string& v) {
  std::set<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t b = item.find_first_not_of(" \t");
    size_t e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.insert(item.substr(b, e - b + 1));
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error("expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v) {
  std::istringstream ss(v);
  T out{};
  ss >> out;
  if (ss.fail() || !ss.eof()) throw config_error("expected a number, got '" + v + "'");
  return out;
}

using Setter = std::function<void(AppConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.corpus", [](AppConfig& c, const std::string& v) { c.data.corpus = v; }},
      {"data.train_archs", [](AppConfig& c, const std::string& v) { c.data.splits.train_archs = parse_set(v); }},
      {"data.train_libs", [](AppConfig& c, const std::string& v) { c.data.splits.train_libs = parse_set(v); }},
      {"data.ood_archs", [](AppConfig& c, const std::string& v) { c.data.splits.ood_archs = parse_set(v); }},
      {"data.ood_libs", [](AppConfig& c, const std::string& v) { c.data.splits.ood_libs = parse_set(v); }},
      {"data.train_pairs",
       [](AppConfig& c, const std::string& v) { c.data.splits.train_pairs = parse_number<size_t>(v); }},
      {"data.test_pairs", [](AppConfig& c, const std::string& v) { c.data.splits.test_pairs = parse_number<size_t>(v); }},
      {"data.allow_mixed_arch_train",
       [](AppConfig& c, const std::string& v) { c.data.splits.allow_mixed_arch_train = parse_bool(v); }},
      {"data.dedupe", [](AppConfig& c, const std::string& v) { c.data.dedupe = parse_bool(v); }},
      {"model.backend", [](AppConfig& c, const std::string& v) { c.train.backend = v; }},
      {"model.weights_dir", [](AppConfig& c, const std::string& v) { c.train.weights_dir = v; }},
      {"model.dim", [](AppConfig& c, const std::string& v) { c.train.dim = parse_number<size_t>(v); }},
      {"model.max_length", [](AppConfig& c, const std::string& v) { c.train.max_length = parse_number<size_t>(v); }},
      {"model.vocab_size", [](AppConfig& c, const std::string& v) { c.train.vocab_size = parse_number<size_t>(v); }},
      {"model.k", [](AppConfig& c, const std::string& v) { c.train.k = parse_number<size_t>(v); }},
      {"model.latent_dim", [](AppConfig& c, const std::string& v) { c.train.latent_dim = parse_number<size_t>(v); }},
      {"model.freeze_embedder", [](AppConfig& c, const std::string& v) { c.train.freeze_embedder = parse_bool(v); }},
      {"model.enable_removal", [](AppConfig& c, const std::string& v) { c.train.enable_removal = parse_bool(v); }},
      {"model.enable_cvib", [](AppConfig& c, const std::string& v) { c.train.enable_cvib = parse_bool(v); }},
      {"model.posterior_log_sigma_init",
       [](AppConfig& c, const std::string& v) { c.train.posterior_log_sigma_init = parse_number<double>(v); }},
      {"loss.beta1", [](AppConfig& c, const std::string& v) { c.train.beta1 = parse_number<double>(v); }},
      {"loss.beta2", [](AppConfig& c, const std::string& v) { c.train.beta2 = parse_number<double>(v); }},
      {"loss.eps_guard", [](AppConfig& c, const std::string& v) { c.train.eps_guard = parse_number<double>(v); }},
      {"train.learning_rate",
       [](AppConfig& c, const std::string& v) { c.train.learning_rate = parse_number<double>(v); }},
      {"train.batch_size", [](AppConfig& c, const std::string& v) { c.train.batch_size = parse_number<size_t>(v); }},
      {"train.epochs", [](AppConfig& c, const std::string& v) { c.train.epochs = parse_number<size_t>(v); }},
      {"train.seed",
       [](AppConfig& c, const std::string& v) {
         c.train.seed = parse_number<uint64_t>(v);
         c.data.splits.seed = c.train.seed;
       }},
      {"train.optimizer", [](AppConfig& c, const std::string& v) { c.train.optimizer = v; }},
      {"train.tau", [](AppConfig& c, const std::string& v) { c.train.tau = parse_number<double>(v); }},
  };
  return table;
}

}  // namespace

void apply_override(AppConfig& cfg, const std::string& dotted_key, const std::string& value) {
  auto it = setters().find(dotted_key);
  if (it == setters().end()) throw config_error("unknown configuration key '" + dotted_key + "'");
  it->second(cfg, value);
}

AppConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw parse_error(std::string("config: ") + e.what());
  }
  AppConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw config_error("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) apply_override(cfg, section + "." + key, value.data());
  }
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

}  // namespace clonesearch
