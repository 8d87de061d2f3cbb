#pragma once

#include "crda/grid_model.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace crda::testing {

inline std::string fixture(const std::string& name) { return std::string(CRDA_FIXTURE_DIR) + "/" + name; }

// Two generators (1, 2) and three loads (3, 4, 5) on a meshed 5-bus network.
inline nlohmann::json toy_grid() {
  using nlohmann::json;
  json doc;
  doc["name"] = "toy5";
  doc["buses"] = {1, 2, 3, 4, 5};
  doc["generators"] = json::array({{{"bus", 1}, {"inertia", 0.2}, {"damping", 2.0}, {"kp", 4.0}, {"ki", 3.0}},
                                   {{"bus", 2}, {"inertia", 0.15}, {"damping", 2.0}, {"kp", 3.0}, {"ki", 3.0}}});
  doc["loads"] = json::array({{{"bus", 3}, {"damping", 1.0}, {"secure_load", 1.0}, {"max_vulnerable_load", 0.5}},
                              {{"bus", 4}, {"damping", 1.0}, {"secure_load", 0.8}, {"max_vulnerable_load", 0.4}},
                              {{"bus", 5}, {"damping", 1.0}, {"secure_load", 0.6}, {"max_vulnerable_load", 0.3}}});
  doc["lines"] = json::array({{{"from", 1}, {"to", 3}, {"reactance", 0.1}},
                              {{"from", 3}, {"to", 4}, {"reactance", 0.2}},
                              {{"from", 4}, {"to", 2}, {"reactance", 0.1}},
                              {{"from", 2}, {"to", 5}, {"reactance", 0.25}},
                              {{"from", 5}, {"to", 3}, {"reactance", 0.2}}});
  doc["attack"] = {{"omega_max", 0.04}, {"buses", json::array()}};
  doc["ibr"] = {{"units", json::array({{{"bus", 4}, {"sensor", 1}, {"gain_min", 0.0}, {"gain_max", 10.0}}})}};
  doc["crews"] = {{"crews", json::array()}};
  doc["planner"] = {{"horizon", 10}, {"samples", 3}};
  return doc;
}

// Attack on the given loads, all sensing generator 1, and one crew per
// repair/travel spec.
struct CrewSpec {
  std::vector<double> repair;
  std::vector<std::vector<double>> travel;
};

inline nlohmann::json with_attack(nlohmann::json doc, const std::vector<int>& buses, const std::vector<double>& bounds,
                                  const std::vector<CrewSpec>& crews, int horizon) {
  using nlohmann::json;
  json list = json::array();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    list.push_back({{"bus", buses[i]}, {"sensor", 1}, {"gain_bound", bounds[i]}});
  }
  doc["attack"]["buses"] = list;
  json cl = json::array();
  for (const auto& c : crews) cl.push_back({{"repair_times", c.repair}, {"travel_times", c.travel}});
  doc["crews"]["crews"] = cl;
  doc["planner"]["horizon"] = horizon;
  std::vector<double> w(buses.size(), 0.01 / (static_cast<double>(buses.size()) * horizon));
  doc["planner"]["weights"] = w;
  return doc;
}

}  // namespace crda::testing
