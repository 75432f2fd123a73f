#include "signbench/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace signbench {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

IniFile IniFile::parse(const std::string& text) {
  IniFile ini;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    ini.sections_[section][key] = value;
  }
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string IniFile::get(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stod(get(section, key, ""));
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + section + "." + key);
  }
}

long long IniFile::get_int(const std::string& section, const std::string& key,
                           long long fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoll(get(section, key, ""));
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + section + "." + key);
  }
}

std::pair<double, double> IniFile::get_range(const std::string& section,
                                             const std::string& key,
                                             std::pair<double, double> fallback) const {
  if (!has(section, key)) return fallback;
  const auto parts = split_commas(get(section, key, ""));
  if (parts.size() != 2) throw ConfigError("range " + section + "." + key + " needs lo,hi");
  try {
    return {std::stod(parts[0]), std::stod(parts[1])};
  } catch (const std::exception&) {
    throw ConfigError("bad range value for " + section + "." + key);
  }
}

std::vector<std::string> IniFile::get_list(const std::string& section,
                                           const std::string& key,
                                           const std::vector<std::string>& fallback) const {
  if (!has(section, key)) return fallback;
  return split_commas(get(section, key, ""));
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  return from_ini(IniFile::load(path));
}

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
  ExperimentConfig cfg;
  cfg.master_seed =
      static_cast<std::uint64_t>(ini.get_int("experiment", "master_seed", 42));
  cfg.output_root = ini.get("experiment", "output_root", "out");
  cfg.asset_root = ini.get("experiment", "asset_root", "assets");
  cfg.architecture = ini.get("experiment", "architecture", "reference");
  make_network(cfg.architecture);  // must be registered

  cfg.generation.master_seed = cfg.master_seed;
  cfg.generation.runs = static_cast<int>(ini.get_int("experiment", "runs", 1));
  cfg.generation.replicas_per_level =
      static_cast<int>(ini.get_int("generation", "replicas_per_level", 50));
  cfg.generation.desk_scale = static_cast<int>(ini.get_int("generation", "desk_scale", 1));
  cfg.generation.designs.clear();
  for (const auto& tag : ini.get_list("generation", "designs", {"ATc", "ATn", "DE"}))
    cfg.generation.designs.push_back(parse_design(tag));
  if (cfg.generation.designs.empty()) throw ConfigError("no designs configured");

  const auto val = ini.get_list("splits", "val", {"5", "12"});
  const auto test = ini.get_list("splits", "test", {"6", "13"});
  if (val.size() != 2 || test.size() != 2)
    throw ConfigError("splits need exactly two val and two test patch ids");
  cfg.val_ids = {std::stoi(val[0]), std::stoi(val[1])};
  cfg.test_ids = {std::stoi(test[0]), std::stoi(test[1])};

  auto& cor = cfg.corruption;
  for (int k = 1; k <= 5; ++k) {
    const auto& fallback = cor.levels[static_cast<std::size_t>(k - 1)];
    const auto range = ini.get_range("corruption", "level" + std::to_string(k),
                                     {fallback.lo, fallback.hi});
    cor.levels[static_cast<std::size_t>(k - 1)] = {k, range.first, range.second};
  }
  std::tie(cor.contrast_lo, cor.contrast_hi) =
      ini.get_range("corruption", "contrast", {cor.contrast_lo, cor.contrast_hi});
  std::tie(cor.brighten_lo, cor.brighten_hi) =
      ini.get_range("corruption", "brighten", {cor.brighten_lo, cor.brighten_hi});
  std::tie(cor.darken_lo, cor.darken_hi) =
      ini.get_range("corruption", "darken", {cor.darken_lo, cor.darken_hi});
  std::tie(cor.noise_sigma_lo, cor.noise_sigma_hi) =
      ini.get_range("corruption", "noise_sigma", {cor.noise_sigma_lo, cor.noise_sigma_hi});
  std::tie(cor.blur_sigma_lo, cor.blur_sigma_hi) =
      ini.get_range("corruption", "blur_sigma", {cor.blur_sigma_lo, cor.blur_sigma_hi});
  std::tie(cor.motion_len_lo, cor.motion_len_hi) =
      ini.get_range("corruption", "motion_length", {cor.motion_len_lo, cor.motion_len_hi});
  std::tie(cor.zoom_scale_lo, cor.zoom_scale_hi) =
      ini.get_range("corruption", "zoom_scale", {cor.zoom_scale_lo, cor.zoom_scale_hi});
  std::tie(cor.shadow_atten_lo, cor.shadow_atten_hi) = ini.get_range(
      "corruption", "shadow_attenuation", {cor.shadow_atten_lo, cor.shadow_atten_hi});
  cor.shadow_softness =
      ini.get_double("corruption", "shadow_softness", cor.shadow_softness);
  {
    const auto range = ini.get_range(
        "corruption", "rain_count",
        {static_cast<double>(cor.rain_count_lo), static_cast<double>(cor.rain_count_hi)});
    cor.rain_count_lo = static_cast<int>(range.first);
    cor.rain_count_hi = static_cast<int>(range.second);
  }
  std::tie(cor.rain_angle_lo_deg, cor.rain_angle_hi_deg) = ini.get_range(
      "corruption", "rain_angle_deg", {cor.rain_angle_lo_deg, cor.rain_angle_hi_deg});
  cor.rain_length = ini.get_double("corruption", "rain_length", cor.rain_length);
  cor.rain_brightness =
      ini.get_double("corruption", "rain_brightness", cor.rain_brightness);
  std::tie(cor.spatter_coverage_lo, cor.spatter_coverage_hi) =
      ini.get_range("corruption", "spatter_coverage",
                    {cor.spatter_coverage_lo, cor.spatter_coverage_hi});
  cor.spatter_blur_sigma =
      ini.get_double("corruption", "spatter_blur_sigma", cor.spatter_blur_sigma);
  cor.spatter_opacity = ini.get_double("corruption", "spatter_opacity", cor.spatter_opacity);
  cor.spatter_darkness =
      ini.get_double("corruption", "spatter_darkness", cor.spatter_darkness);
  cor.min_downsampled_side = static_cast<int>(
      ini.get_int("corruption", "min_downsampled_side", cor.min_downsampled_side));

  cfg.training.epochs = static_cast<int>(ini.get_int("training", "epochs", 60));
  cfg.training.batch_size = static_cast<int>(ini.get_int("training", "batch_size", 64));
  cfg.training.initial_lr = ini.get_double("training", "initial_lr", 1e-3);
  cfg.training.plateau_patience =
      static_cast<int>(ini.get_int("training", "plateau_patience", 10));
  cfg.training.plateau_factor = ini.get_double("training", "plateau_factor", 0.2);
  cfg.training.min_delta = ini.get_double("training", "min_delta", 1e-6);
  cfg.training.seed = static_cast<std::uint64_t>(ini.get_int("training", "seed", 1));

  const auto pair_list = ini.get_list("evaluation", "pairs", {"default"});
  cfg.pairs.clear();
  if (pair_list.size() == 1 && pair_list[0] == "default") {
    cfg.pairs = default_pairs();
  } else {
    for (const auto& label : pair_list) {
      const auto dash = label.find('-');
      if (dash == std::string::npos)
        throw ConfigError("evaluation pair must look like ATc-ATn: " + label);
      EvaluationPair pair;
      pair.train = parse_design_set(label.substr(0, dash));
      pair.eval = parse_design(label.substr(dash + 1));
      cfg.pairs.push_back(pair);
    }
  }
  for (const auto& pair : cfg.pairs)
    if (!pair_allowed(pair))
      throw ConfigError("evaluation pair " + pair.label() + " is not allowed");

  for (const auto& tag : ini.get_list("evaluation", "composites", {})) {
    const auto set = parse_design_set(tag);
    if (is_base(set)) throw ConfigError("composites must be CUR or ALL, got " + tag);
    cfg.composites.push_back(set);
  }

  cfg.lrp.eps_factor = ini.get_double("lrp", "eps_factor", cfg.lrp.eps_factor);
  cfg.lrp.eps_floor = ini.get_double("lrp", "eps_floor", cfg.lrp.eps_floor);
  cfg.lrp.alpha = ini.get_double("lrp", "alpha", cfg.lrp.alpha);
  cfg.lrp.beta = ini.get_double("lrp", "beta", cfg.lrp.beta);
  if (std::abs(cfg.lrp.alpha - cfg.lrp.beta - 1.0) > 1e-12)
    throw ConfigError("lrp alpha - beta must equal 1");
  return cfg;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "master_seed=" << master_seed << "\narchitecture=" << architecture
     << "\nruns=" << generation.runs << "\nreplicas=" << generation.replicas_per_level
     << "\ndesk_scale=" << generation.desk_scale << "\ndesigns=";
  for (const auto d : generation.designs) os << design_name(d) << ",";
  os << "\nval=" << val_ids[0] << "," << val_ids[1] << " test=" << test_ids[0] << ","
     << test_ids[1];
  os << "\ncorruption_digest=" << generation_digest(generation, corruption);
  os << "\nepochs=" << training.epochs << " batch=" << training.batch_size
     << " lr=" << training.initial_lr << " patience=" << training.plateau_patience
     << " factor=" << training.plateau_factor << " min_delta=" << training.min_delta
     << " seed=" << training.seed;
  os << "\npairs=";
  for (const auto& pair : pairs) os << pair.label() << ",";
  os << "\ncomposites=";
  for (const auto c : composites) os << design_set_name(c) << ",";
  os << "\nlrp=" << lrp.eps_factor << "," << lrp.eps_floor << "," << lrp.alpha << ","
     << lrp.beta;
  return os.str();
}

std::uint64_t ExperimentConfig::digest() const { return fnv1a(canonical()); }

std::filesystem::path ExperimentConfig::work_dir() const {
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest()));
  return output_root / hex;
}

}  // namespace signbench
