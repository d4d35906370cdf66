#include "hmof/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmof/error.hpp"

namespace hmof {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find('.') == std::string::npos) {
      throw ConfigError(where + ": key '" + key + "' is not of the form section.key");
    }
    if (!out.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str(), path.string());
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"paths.train_dir", "data/train/frames", "directory of training frames (normal only)"},
      {"paths.test_dir", "data/test/frames", "directory of test frames"},
      {"paths.pattern", "*.pgm", "filename glob selecting frames inside a frame directory"},
      {"paths.gt_path", "data/test/gt.csv", "ground-truth labels, one 'frame,label' per line"},
      {"paths.gt_masks", "auto", "mask directory; auto = masks/ next to the gt file"},
      {"paths.model_dir", "models", "where train writes and detect reads models"},
      {"paths.out_dir", "out", "detection, evaluation and benchmark outputs"},
      {"paths.synth_dir", "data/synth", "where synth writes a generated sequence"},
      {"grid.patch_size", "20", "square patch edge in pixels"},
      {"flow.iterations", "100", "Horn-Schunck iterations"},
      {"flow.smoothness", "15", "smoothness weight alpha on the 8-bit intensity scale"},
      {"fg.learning_rate", "0.05", "running-average background update rate"},
      {"fg.sensitivity", "0.1", "intensity deviation giving full foreground weight"},
      {"fg.tau", "auto", "patch foreground threshold; auto = 0.05 * patch_size^2"},
      {"fg.warmup_frames", "30", "frames used only to settle the background"},
      {"feat.kind", "hmof", "descriptor: hmof, hof or mhof"},
      {"feat.bins", "8", "magnitude bins (hmof) or direction sectors (hof, mhof)"},
      {"feat.discard_fraction", "0.05", "top fraction of training magnitudes ignored for delta"},
      {"feat.mhof_thresh", "auto", "mhof magnitude band split; auto = delta / 2"},
      {"feat.delta_source", "foreground", "delta from 'foreground' patch pixels or 'all' pixels"},
      {"ae.hidden", "4", "latent dimension"},
      {"ae.epochs", "200", "training epochs"},
      {"ae.lr", "0.1", "learning rate"},
      {"ae.batch", "64", "mini-batch size"},
      {"ae.seed", "1", "initialization and shuffling seed"},
      {"ae.halve_on_increase", "true", "halve the rate and retry when an epoch raises the loss"},
      {"ae.output", "latent", "classifier input: 'latent' codes or 'reconstruction'"},
      {"gmm.k", "5", "mixture components"},
      {"gmm.seed", "1", "EM initialization seed"},
      {"gmm.max_iters", "200", "EM iteration cap"},
      {"gmm.tol", "1e-6", "EM stop when mean log-likelihood gain falls below this"},
      {"gmm.reg", "1e-6", "diagonal covariance regularizer"},
      {"gmm.alpha_quantile", "0.01", "training-score quantile used as alpha"},
      {"gmm.alpha", "auto", "explicit patch threshold; auto = calibrated"},
      {"gmm.beta", "3", "abnormal patches needed to flag a frame"},
      {"synth.width", "320", "generated frame width"},
      {"synth.height", "240", "generated frame height"},
      {"synth.frames", "400", "generated frame count"},
      {"synth.seed", "7", "generator seed"},
      {"synth.normal_count", "6", "normal movers"},
      {"synth.normal_speed_min", "0.5", "slowest normal mover, px/frame"},
      {"synth.normal_speed_max", "1.5", "fastest normal mover, px/frame"},
      {"synth.anomaly_count", "2", "anomaly movers"},
      {"synth.anomaly_speed_min", "4", "slowest anomaly mover, px/frame"},
      {"synth.anomaly_speed_max", "6", "fastest anomaly mover, px/frame"},
      {"synth.window_start", "250", "first anomaly frame"},
      {"synth.window_end", "350", "last anomaly frame, inclusive"},
      {"synth.object_size", "16", "mover edge in pixels"},
      {"synth.edge_ramp", "4", "soft edge width in pixels"},
      {"synth.directions", "any", "mover headings: 'any' or 'horizontal'"},
      {"run.threads", "1", "frame-parallel detection workers"},
      {"out.patch_scores", "true", "write patch_scores.csv (needed for pixel-level metrics)"},
      {"out.masks", "true", "write masks/NNNNNN.pgm detection masks"},
      {"out.features", "false", "write features.csv with every test descriptor"},
      {"out.alpha_maps", "false", "write alpha/NNNNNN.pgm foreground weights"},
      {"out.flow", "false", "write flow/NNNNNN.flow binary flow fields"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void Config::load_file(const std::filesystem::path& path) {
  for (const auto& [key, value] : read_key_values(path)) set(key, value);
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

int Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string Config::dump() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace hmof
