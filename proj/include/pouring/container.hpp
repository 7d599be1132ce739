#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pouring/rng.hpp"

namespace pouring {

// Geometry and acoustic character of a target container. v1 models a
// constant-radius cylinder; the diameter drives both the height<->volume map
// and the open-end correction of the resonance model.
struct ContainerSpec {
  std::string name;
  double total_height_mm = 0.0;
  double inner_diameter_mm = 0.0;
  double material_damping = 1.0;  // in (0, 1], scales harmonic content
  double resonance_gain = 0.3;    // linear amplitude of the air-column tone
};

inline void validate(const ContainerSpec& c) {
  if (!(c.total_height_mm > 0.0)) {
    throw std::invalid_argument("container '" + c.name + "': total_height_mm must be > 0");
  }
  if (!(c.inner_diameter_mm > 0.0)) {
    throw std::invalid_argument("container '" + c.name + "': inner_diameter_mm must be > 0");
  }
  if (!(c.material_damping > 0.0) || c.material_damping > 1.0) {
    throw std::invalid_argument("container '" + c.name + "': material_damping must be in (0, 1]");
  }
}

inline double cross_section_area_mm2(const ContainerSpec& c) {
  return kPi * 0.25 * c.inner_diameter_mm * c.inner_diameter_mm;
}

inline double capacity_ml(const ContainerSpec& c) {
  return cross_section_area_mm2(c) * c.total_height_mm / 1000.0;
}

// Default container library. The first three mirror the heights of the
// dataset cups (glass 127 mm, thermos 150 mm, mug 99 mm); plastic_cup is a
// held-out geometry used only for generalization runs.
inline std::vector<ContainerSpec> default_containers() {
  return {
      {"glass", 127.0, 64.0, 0.96, 0.30},
      {"thermos", 150.0, 66.0, 0.90, 0.34},
      {"mug", 99.0, 58.0, 0.93, 0.27},
      {"plastic_cup", 103.0, 62.0, 0.95, 0.29},
  };
}

inline const ContainerSpec& find_container(const std::vector<ContainerSpec>& library,
                                           const std::string& name) {
  for (const ContainerSpec& c : library) {
    if (c.name == name) return c;
  }
  throw std::invalid_argument("unknown container '" + name + "'");
}

inline std::vector<ContainerSpec> load_containers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open container library " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<ContainerSpec> out;
  for (const auto& item : doc) {
    ContainerSpec c;
    c.name = item.at("name").get<std::string>();
    c.total_height_mm = item.at("total_height_mm").get<double>();
    c.inner_diameter_mm = item.at("inner_diameter_mm").get<double>();
    c.material_damping = item.value("material_damping", 1.0);
    c.resonance_gain = item.value("resonance_gain", 0.3);
    validate(c);
    out.push_back(std::move(c));
  }
  if (out.empty()) throw std::runtime_error(path + ": container library is empty");
  return out;
}

}  // namespace pouring
