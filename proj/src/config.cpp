#include "murmur/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "murmur/error.hpp"

namespace murmur {

using nlohmann::json;

namespace {

std::string_view entropy_mode_name(EntropyMode m) {
  return m == EntropyMode::EntropyOfMean ? "entropy_of_mean" : "mean_of_entropies";
}
std::string_view vote_rule_name(VoteRule r) { return r == VoteRule::Share ? "share" : "quotient"; }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigError, what);
}

}  // namespace

void validate(const PipelineConfig& c) {
  require(c.n_fft == 64 || c.n_fft == 128 || c.n_fft == 256, "n_fft must be 64, 128 or 256");
  require(c.psd_thr >= 0 && c.psd_thr < 1, "psd_thr must be in [0, 1)");
  require(c.min_keep >= 0, "min_keep must be non-negative");
  require(c.window_s > 0 && c.hop_s > 0, "window_s and hop_s must be positive");
  require(c.oversample_divisor >= 1, "oversample_divisor must be at least 1");
  require(c.vote_thr >= 0 && c.vote_thr < 1, "vote_thr must be in [0, 1)");
  require(c.fallback_thr >= 0 && c.fallback_thr < 1, "fallback_thr must be in [0, 1)");
  require(c.cs_threshold >= 0 && c.cs_threshold <= 1, "cs_threshold must be in [0, 1]");
  require(c.confident_ratio >= 0 && c.confident_ratio <= 1, "confident_ratio must be in [0, 1]");
  require(c.mcd_passes >= 2, "mcd_passes must be at least 2");
  require(c.alpha >= 0 && c.alpha <= 1, "alpha must be in [0, 1]");
  require(c.variant != nn::Variant::Custom, "variant must be light, baseline or heavy");
  require(c.epochs >= 1, "epochs must be at least 1");
  require(c.batch_size >= 1, "batch_size must be at least 1");
  require(c.lr > 0, "lr must be positive");
  require(c.weight_decay >= 0, "weight_decay must be non-negative");
}

std::string to_json(const PipelineConfig& c) {
  // nlohmann::ordered_json keeps the field order stable in report headers.
  nlohmann::ordered_json j;
  j["n_fft"] = c.n_fft;
  j["psd_thr"] = c.psd_thr;
  j["min_keep"] = c.min_keep;
  j["window_s"] = c.window_s;
  j["hop_s"] = c.hop_s;
  j["oversample_divisor"] = c.oversample_divisor;
  j["vote_thr"] = c.vote_thr;
  j["fallback_thr"] = c.fallback_thr;
  j["cs_threshold"] = c.cs_threshold;
  j["confident_ratio"] = c.confident_ratio;
  j["mcd_passes"] = c.mcd_passes;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["variant"] = std::string(nn::to_string(c.variant));
  j["selective"] = c.selective;
  j["entropy_mode"] = std::string(entropy_mode_name(c.entropy_mode));
  j["vote_rule"] = std::string(vote_rule_name(c.vote_rule));
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  return j.dump();
}

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  PipelineConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "n_fft") c.n_fft = v.get<int>();
      else if (k == "psd_thr") c.psd_thr = v.get<double>();
      else if (k == "min_keep") c.min_keep = v.get<int>();
      else if (k == "window_s") c.window_s = v.get<double>();
      else if (k == "hop_s") c.hop_s = v.get<double>();
      else if (k == "oversample_divisor") c.oversample_divisor = v.get<int>();
      else if (k == "vote_thr") c.vote_thr = v.get<double>();
      else if (k == "fallback_thr") c.fallback_thr = v.get<double>();
      else if (k == "cs_threshold") c.cs_threshold = v.get<double>();
      else if (k == "confident_ratio") c.confident_ratio = v.get<double>();
      else if (k == "mcd_passes") c.mcd_passes = v.get<int>();
      else if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "variant") c.variant = nn::parse_variant(v.get<std::string>());
      else if (k == "selective") c.selective = v.get<bool>();
      else if (k == "entropy_mode") {
        const auto s = v.get<std::string>();
        require(s == "entropy_of_mean" || s == "mean_of_entropies", "unknown entropy_mode " + s);
        c.entropy_mode = s == "entropy_of_mean" ? EntropyMode::EntropyOfMean : EntropyMode::MeanOfEntropies;
      } else if (k == "vote_rule") {
        const auto s = v.get<std::string>();
        require(s == "share" || s == "quotient", "unknown vote_rule " + s);
        c.vote_rule = s == "share" ? VoteRule::Share : VoteRule::Quotient;
      } else if (k == "epochs") c.epochs = v.get<int>();
      else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "lr") c.lr = v.get<double>();
      else if (k == "weight_decay") c.weight_decay = v.get<double>();
      else throw Error(ErrorCode::ConfigError, "unknown config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  // Accept a report header line as well as bare JSON.
  if (text.rfind("# config ", 0) == 0) text = text.substr(9, text.find('\n') - 9);
  return config_from_json(text);
}

std::string config_header(const PipelineConfig& config) { return "# config " + to_json(config) + "\n"; }

}  // namespace murmur
