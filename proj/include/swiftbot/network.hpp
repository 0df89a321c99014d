// Copyright the swiftbot authors. Apache 2.0 licensed. See LICENSE in the project root.
#pragma once

#include <map>
#include <string>
#include <utility>

#include "swiftbot/common/errors.hpp"

namespace swiftbot {

/// Static per-link bandwidth/latency view used by migration costing and the
/// proximity term of target selection.
class LinkModel {
 public:
  virtual ~LinkModel() = default;
  virtual double bandwidth_mibps(const std::string& a, const std::string& b) const = 0;
  virtual double latency_s(const std::string& a, const std::string& b) const = 0;
};

class StaticLinkModel : public LinkModel {
 public:
  StaticLinkModel(double default_bandwidth_mibps, double default_latency_s)
      : default_bw_(default_bandwidth_mibps), default_lat_(default_latency_s) {}

  void set_bandwidth(const std::string& a, const std::string& b, double mibps) {
    bw_[{a, b}] = mibps;
  }
  void set_latency(const std::string& a, const std::string& b, double seconds) {
    lat_[{a, b}] = seconds;
  }

  double bandwidth_mibps(const std::string& a, const std::string& b) const override {
    if (a == b) return 1e9;  // node-local transfer
    if (auto v = find(bw_, a, b)) return *v;
    if (default_bw_ > 0) return default_bw_;
    throw ConfigError("no bandwidth entry for link " + a + " <-> " + b);
  }

  double latency_s(const std::string& a, const std::string& b) const override {
    if (a == b) return 0.0;
    if (auto v = find(lat_, a, b)) return *v;
    return default_lat_;
  }

 private:
  using Table = std::map<std::pair<std::string, std::string>, double>;

  static const double* find(const Table& t, const std::string& a, const std::string& b) {
    auto it = t.find({a, b});
    if (it != t.end()) return &it->second;
    it = t.find({b, a});
    if (it != t.end()) return &it->second;
    return nullptr;
  }

  double default_bw_;
  double default_lat_;
  Table bw_;
  Table lat_;
};

}  // namespace swiftbot
