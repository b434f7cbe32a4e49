#include "normforge/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "normforge/errors.hpp"

namespace normforge {

namespace {

struct RawEntry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& key, const RawEntry& e) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(e.line, "key '" + key + "' expects a number, got '" + e.value + "'");
  }
}

long parse_long(const std::string& key, const RawEntry& e) {
  long v = 0;
  const auto* begin = e.value.data();
  const auto* end = begin + e.value.size();
  const auto r = std::from_chars(begin, end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    fail(e.line, "key '" + key + "' expects an integer, got '" + e.value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const RawEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  fail(e.line, "key '" + key + "' expects true/false, got '" + e.value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const RawEntry& e) {
  std::vector<int> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(e.line, "key '" + key + "': empty list element");
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail(e.line, "key '" + key + "': '" + item + "' is not an integer");
    }
  }
  if (out.empty()) fail(e.line, "key '" + key + "': empty list");
  return out;
}

}  // namespace

void RunConfig::validate() const {
  variant.validate();
  model.validate();
  data.validate();
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (schedule.total_steps < 0) throw ConfigError("schedule.total_steps must be >= 0");
  if (!(schedule.warmup_frac >= 0.0 && schedule.warmup_frac <= schedule.stable_frac &&
        schedule.stable_frac <= 1.0)) {
    throw ConfigError("schedule: need 0 <= warmup_frac <= stable_frac <= 1");
  }
  if (!(schedule.final_frac_of_peak > 0.0 && schedule.final_frac_of_peak <= 1.0)) {
    throw ConfigError("schedule.final_frac_of_peak must be in (0, 1]");
  }
  if (data.kind == DatasetKind::CharCopy &&
      model.layer_dims.front() != model.layer_dims.back()) {
    throw ConfigError("char_copy data needs matching model input/output widths");
  }
}

std::map<std::string, std::string> RunConfig::flatten() const {
  std::map<std::string, std::string> m;
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  m["variant.sd_type"] = variant.sd_type == SdType::Constrained ? "constrained" : "regularized";
  m["variant.product_norm"] = variant.product_norm == ProductNormKind::Inf  ? "inf"
                              : variant.product_norm == ProductNormKind::L2 ? "l2"
                                                                            : "hybrid";
  m["variant.backup_norm"] = variant.backup_norm == BackupNormKind::Inf      ? "inf"
                             : variant.backup_norm == BackupNormKind::AdaInf ? "ada_inf"
                                                                             : "ada_2";
  m["variant.truncation"] = variant.truncation ? "true" : "false";
  m["variant.stale"] = variant.stale ? "true" : "false";
  m["variant.eta_m"] = fmt(variant.eta_m);
  m["variant.eta_b"] = fmt(variant.eta_b);
  m["variant.beta"] = fmt(variant.beta);
  m["variant.beta2"] = fmt(variant.beta2);
  m["variant.epsilon"] = fmt(variant.epsilon);
  m["variant.f_star"] = fmt(variant.f_star);
  m["schedule.total_steps"] = std::to_string(schedule.total_steps);
  m["schedule.warmup_frac"] = fmt(schedule.warmup_frac);
  m["schedule.stable_frac"] = fmt(schedule.stable_frac);
  m["schedule.final_frac_of_peak"] = fmt(schedule.final_frac_of_peak);
  {
    std::string dims;
    for (std::size_t i = 0; i < model.layer_dims.size(); ++i) {
      if (i) dims += ",";
      dims += std::to_string(model.layer_dims[i]);
    }
    m["model.layer_dims"] = dims;
  }
  m["model.activation"] = model.activation == Activation::Tanh ? "tanh" : "relu";
  m["model.loss"] = model.loss == LossKind::SoftmaxXent ? "softmax_xent" : "mse";
  m["model.seed"] = std::to_string(model.seed);
  m["data.kind"] = data.kind == DatasetKind::TeacherNet      ? "teacher_net"
                   : data.kind == DatasetKind::GaussianBlobs ? "gaussian_blobs"
                                                             : "char_copy";
  m["data.size"] = std::to_string(data.size);
  m["data.noise"] = fmt(data.noise);
  m["data.seed"] = std::to_string(data.seed);
  m["steps"] = std::to_string(steps);
  m["batch_size"] = std::to_string(batch_size);
  m["log_every"] = std::to_string(log_every);
  m["out_dir"] = out_dir.string();
  m["seed"] = std::to_string(seed);
  return m;
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, RawEntry> entries;
  {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(lineno, "empty key");
      if (auto it = entries.find(key); it != entries.end()) {
        throw ConfigError("duplicate key '" + key + "' (lines " +
                          std::to_string(it->second.line) + " and " + std::to_string(lineno) +
                          ")");
      }
      entries[key] = RawEntry{value, lineno};
    }
  }

  RunConfig cfg;
  auto take = [&entries](const std::string& key) -> const RawEntry* {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    return &it->second;
  };
  std::map<std::string, bool> known;
  auto handled = [&known](const std::string& key) { known[key] = true; };

  auto get_double = [&](const std::string& key, double& dst) {
    handled(key);
    if (const RawEntry* e = take(key)) dst = parse_double(key, *e);
  };
  auto get_long = [&](const std::string& key, long& dst) {
    handled(key);
    if (const RawEntry* e = take(key)) dst = parse_long(key, *e);
  };
  auto get_int = [&](const std::string& key, int& dst) {
    handled(key);
    if (const RawEntry* e = take(key)) dst = static_cast<int>(parse_long(key, *e));
  };
  auto get_u64 = [&](const std::string& key, std::uint64_t& dst) {
    handled(key);
    if (const RawEntry* e = take(key)) dst = static_cast<std::uint64_t>(parse_long(key, *e));
  };
  auto get_bool = [&](const std::string& key, bool& dst) {
    handled(key);
    if (const RawEntry* e = take(key)) dst = parse_bool(key, *e);
  };

  // variant
  handled("variant.sd_type");
  if (const RawEntry* e = take("variant.sd_type")) {
    if (e->value == "constrained") cfg.variant.sd_type = SdType::Constrained;
    else if (e->value == "regularized") cfg.variant.sd_type = SdType::Regularized;
    else fail(e->line, "variant.sd_type must be constrained|regularized, got '" + e->value + "'");
  }
  handled("variant.product_norm");
  if (const RawEntry* e = take("variant.product_norm")) {
    if (e->value == "inf") cfg.variant.product_norm = ProductNormKind::Inf;
    else if (e->value == "l2") cfg.variant.product_norm = ProductNormKind::L2;
    else if (e->value == "hybrid") cfg.variant.product_norm = ProductNormKind::Hybrid;
    else fail(e->line, "variant.product_norm must be inf|l2|hybrid, got '" + e->value + "'");
  }
  handled("variant.backup_norm");
  if (const RawEntry* e = take("variant.backup_norm")) {
    if (e->value == "inf") cfg.variant.backup_norm = BackupNormKind::Inf;
    else if (e->value == "ada_inf") cfg.variant.backup_norm = BackupNormKind::AdaInf;
    else if (e->value == "ada_2") cfg.variant.backup_norm = BackupNormKind::Ada2;
    else fail(e->line, "variant.backup_norm must be inf|ada_inf|ada_2, got '" + e->value + "'");
  }
  get_bool("variant.truncation", cfg.variant.truncation);
  get_bool("variant.stale", cfg.variant.stale);
  get_double("variant.eta_m", cfg.variant.eta_m);
  get_double("variant.eta_b", cfg.variant.eta_b);
  get_double("variant.beta", cfg.variant.beta);
  get_double("variant.beta2", cfg.variant.beta2);
  get_double("variant.epsilon", cfg.variant.epsilon);
  get_double("variant.f_star", cfg.variant.f_star);

  // schedule
  get_long("schedule.total_steps", cfg.schedule.total_steps);
  get_double("schedule.warmup_frac", cfg.schedule.warmup_frac);
  get_double("schedule.stable_frac", cfg.schedule.stable_frac);
  get_double("schedule.final_frac_of_peak", cfg.schedule.final_frac_of_peak);

  // model
  handled("model.layer_dims");
  if (const RawEntry* e = take("model.layer_dims")) {
    cfg.model.layer_dims = parse_int_list("model.layer_dims", *e);
  }
  handled("model.activation");
  if (const RawEntry* e = take("model.activation")) {
    if (e->value == "tanh") cfg.model.activation = Activation::Tanh;
    else if (e->value == "relu") cfg.model.activation = Activation::Relu;
    else fail(e->line, "model.activation must be tanh|relu, got '" + e->value + "'");
  }
  handled("model.loss");
  if (const RawEntry* e = take("model.loss")) {
    if (e->value == "softmax_xent") cfg.model.loss = LossKind::SoftmaxXent;
    else if (e->value == "mse") cfg.model.loss = LossKind::Mse;
    else fail(e->line, "model.loss must be softmax_xent|mse, got '" + e->value + "'");
  }
  get_u64("model.seed", cfg.model.seed);

  // data
  handled("data.kind");
  if (const RawEntry* e = take("data.kind")) {
    if (e->value == "teacher_net") cfg.data.kind = DatasetKind::TeacherNet;
    else if (e->value == "gaussian_blobs") cfg.data.kind = DatasetKind::GaussianBlobs;
    else if (e->value == "char_copy") cfg.data.kind = DatasetKind::CharCopy;
    else {
      fail(e->line,
           "data.kind must be teacher_net|gaussian_blobs|char_copy, got '" + e->value + "'");
    }
  }
  get_long("data.size", cfg.data.size);
  get_double("data.noise", cfg.data.noise);
  get_u64("data.seed", cfg.data.seed);

  // top level
  get_long("steps", cfg.steps);
  get_int("batch_size", cfg.batch_size);
  get_int("log_every", cfg.log_every);
  handled("out_dir");
  if (const RawEntry* e = take("out_dir")) cfg.out_dir = e->value;
  get_u64("seed", cfg.seed);

  for (const auto& [key, entry] : entries) {
    if (!known.contains(key)) {
      fail(entry.line, "unknown key '" + key + "'");
    }
  }

  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace normforge
