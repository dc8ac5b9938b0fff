#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pcc/metrics.hpp"

namespace pcc {
namespace {

struct Accumulator {
  std::size_t count = 0;
  std::array<double, 5> sum{};
  std::array<bool, 5> present{true, true, true, true, true};

  void add(const MetricValues& v) {
    const std::array<const std::optional<double>*, 5> fields{&v.cd, &v.dcd, &v.fscore_small,
                                                             &v.fscore_large, &v.seg_macc};
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i]->has_value())
        sum[i] += **fields[i];
      else
        present[i] = false;
    }
    ++count;
  }

  MetricValues mean() const {
    MetricValues v;
    const std::array<std::optional<double>*, 5> fields{&v.cd, &v.dcd, &v.fscore_small, &v.fscore_large,
                                                       &v.seg_macc};
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (count > 0 && present[i]) *fields[i] = sum[i] / static_cast<double>(count);
    return v;
  }
};

std::string format(const std::optional<double>& v, int precision) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

std::string tau_label(double tau) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return buf;
}

}  // namespace

void MetricsReport::aggregate() {
  aggregates.clear();
  std::set<int> blocks;
  std::set<std::string> categories;
  for (const auto& r : samples) {
    blocks.insert(r.block);
    categories.insert(r.category);
  }
  for (int b : blocks) {
    Accumulator all;
    std::map<std::string, Accumulator> by_cat;
    for (const auto& r : samples) {
      if (r.block != b) continue;
      all.add(r.values);
      by_cat[r.category].add(r.values);
    }
    aggregates.push_back({"mean", "all", b, all.mean()});
    for (const auto& c : categories) aggregates.push_back({"mean:" + c, c, b, by_cat[c].mean()});
  }
}

const MetricRow& MetricsReport::overall(int block) const {
  for (const auto& r : aggregates)
    if (r.id == "mean" && r.block == block) return r;
  throw std::out_of_range("metrics report has no aggregate for block " + std::to_string(block));
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "id,category,block," << (config.cd_squared ? "cd_sq_x1e4" : "cd_l2_x1e4") << ",dcd_alpha_"
      << tau_label(config.dcd_alpha) << ",fscore_tau_" << tau_label(config.fscore_tau_small)
      << ",fscore_tau_" << tau_label(config.fscore_tau_large) << ",seg_macc\n";
  auto row = [&out](const MetricRow& r) {
    out << r.id << ',' << r.category << ',' << r.block << ',' << format(r.values.cd, 6) << ','
        << format(r.values.dcd, 6) << ',' << format(r.values.fscore_small, 6) << ','
        << format(r.values.fscore_large, 6) << ',' << format(r.values.seg_macc, 6) << '\n';
  };
  for (const auto& r : samples) row(r);
  for (const auto& r : aggregates) row(r);
  return out.str();
}

std::string MetricsReport::to_markdown() const {
  std::ostringstream out;
  out << "CD is the " << (config.cd_squared ? "squared" : "unsquared L2")
      << " Chamfer distance x 1e4. DCD uses alpha = " << tau_label(config.dcd_alpha)
      << ". F-score thresholds are absolute distances in normalized model units: F@0.01% uses tau = "
      << tau_label(config.fscore_tau_small) << ", F@0.1% uses tau = " << tau_label(config.fscore_tau_large)
      << ".\n\n";
  out << "| Rows | Block | CD | DCD | F@0.01% | F@0.1% | mAcc |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : aggregates) {
    out << "| " << r.id << " | " << r.block << " | " << format(r.values.cd, 3) << " | "
        << format(r.values.dcd, 3) << " | " << format(r.values.fscore_small, 3) << " | "
        << format(r.values.fscore_large, 3) << " | " << format(r.values.seg_macc, 4) << " |\n";
  }
  return out.str();
}

}  // namespace pcc
