#include "pcc/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pcc/io.hpp"

namespace pcc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Bad : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw Bad("expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_f64(const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || *end || !std::isfinite(out)) throw Bad("expected a finite number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw Bad("expected true or false, got '" + v + "'");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PCC_SIZE(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = static_cast<std::size_t>(to_u64(v)); }, \
         [](const RunConfig& c) { return std::to_string(c.member); }}}
#define PCC_U64(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_u64(v); }, \
         [](const RunConfig& c) { return std::to_string(c.member); }}}
#define PCC_F64(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_f64(v); }, \
         [](const RunConfig& c) { return num(c.member); }}}
#define PCC_BOOL(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_bool(v); }, \
         [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      PCC_SIZE("net.m_blocks", net.m_blocks),
      PCC_SIZE("net.n_points", net.n_points),
      PCC_SIZE("net.k_neighbors", net.k_neighbors),
      PCC_SIZE("net.decoder_levels", net.decoder_levels),
      PCC_SIZE("net.decoder_branching", net.decoder_branching),
      PCC_F64("net.width_multiplier", net.width_multiplier),
      PCC_SIZE("net.f_prime_width", net.f_prime_width),
      PCC_SIZE("net.f_double_prime_width", net.f_double_prime_width),
      PCC_F64("net.alpha1", net.alpha1),
      PCC_F64("net.alpha2", net.alpha2),
      PCC_BOOL("net.enable_segmentation", net.enable_segmentation),
      PCC_BOOL("net.enable_completion", net.enable_completion),
      PCC_BOOL("net.enable_feature_sharing", net.enable_feature_sharing),
      PCC_BOOL("net.enable_label_mult_fps", net.enable_label_mult_fps),
      PCC_BOOL("net.enable_knn_refine", net.enable_knn_refine),
      PCC_F64("train.lr", train.lr),
      PCC_SIZE("train.batch_size", train.batch_size),
      PCC_SIZE("train.epochs", train.epochs),
      PCC_U64("train.seed", train.seed),
      PCC_F64("train.beta1", train.beta1),
      PCC_F64("train.beta2", train.beta2),
      PCC_F64("train.eps", train.eps),
      PCC_SIZE("train.checkpoint_interval", train.checkpoint_interval),
      PCC_SIZE("train.max_steps", train.max_steps),
      PCC_BOOL("metric.cd_squared", metric.cd_squared),
      PCC_F64("metric.dcd_alpha", metric.dcd_alpha),
      PCC_F64("metric.fscore_tau_small", metric.fscore_tau_small),
      PCC_F64("metric.fscore_tau_large", metric.fscore_tau_large),
      PCC_F64("metric.seg_threshold", metric.seg_threshold),
      {"eval.split", {[](RunConfig& c, const std::string& v) {
                        if (v != "train" && v != "val" && v != "test") throw Bad("expected train, val or test, got '" + v + "'");
                        c.eval.split = v;
                      },
                      [](const RunConfig& c) { return c.eval.split; }}},
      PCC_BOOL("eval.all_blocks", eval.all_blocks),
      PCC_BOOL("eval.oracle", eval.oracle),
      PCC_SIZE("synth.dense_factor", synth.dense_factor),
      PCC_F64("synth.clutter_min", synth.clutter_min),
      PCC_F64("synth.clutter_max", synth.clutter_max),
      PCC_F64("synth.separation", synth.separation),
      PCC_F64("synth.view_radius", synth.view_radius),
      PCC_F64("synth.flip_radius_factor", synth.flip_radius_factor),
      PCC_F64("synth.voxel_fraction", synth.voxel_fraction),
  };
  return table;
}

#undef PCC_SIZE
#undef PCC_U64
#undef PCC_F64
#undef PCC_BOOL

}  // namespace

RunConfig RunConfig::from_profile(const std::string& name) {
  RunConfig c;
  if (name == "full") {
    c.net = CsNetConfig::full();
  } else if (name == "desk") {
    c.net = CsNetConfig::desk();
    c.train.batch_size = 4;
    c.train.epochs = 30;
  } else {
    throw std::invalid_argument("unknown profile '" + name + "' (expected desk or full)");
  }
  c.profile = name;
  c.synth.points = c.net.n_points;
  return c;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  struct Line {
    std::size_t no;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::string profile = "full";
  std::istringstream in(text);
  std::string raw;
  for (std::size_t no = 1; std::getline(in, raw); ++no) {
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ": line " + std::to_string(no) + ": expected 'key = value'");
    Line l{no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (l.key == "profile")
      profile = l.value;
    else
      lines.push_back(std::move(l));
  }
  RunConfig c;
  try {
    c = from_profile(profile);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  for (const auto& l : lines) c.set(l.key, l.value, source + ": line " + std::to_string(l.no));
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  if (key == "profile") {
    *this = from_profile(value);
    return;
  }
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  try {
    it->second.set(*this, value);
  } catch (const Bad& e) {
    throw std::invalid_argument(where + ": " + key + ": " + e.what());
  }
  if (key == "net.n_points") synth.points = net.n_points;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "': expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "override");
}

void RunConfig::validate() const {
  net.validate();
  train.validate();
  if (!(metric.dcd_alpha > 0.0)) throw std::invalid_argument("metric.dcd_alpha must be positive");
  if (!(metric.fscore_tau_small > 0.0) || !(metric.fscore_tau_large > 0.0))
    throw std::invalid_argument("metric.fscore_tau_* must be positive");
  if (!(metric.seg_threshold > 0.0 && metric.seg_threshold < 1.0))
    throw std::invalid_argument("metric.seg_threshold must lie in (0,1)");
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out{"profile"};
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out = "profile = " + profile + "\n";
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace pcc
