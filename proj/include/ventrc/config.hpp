#pragma once

// Scenario files: INI sections [patient], [ventilator], [circuit].
// Missing [circuit] keys fall back to CircuitParameters defaults.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <string>

#include "ventrc/errors.hpp"
#include "ventrc/io.hpp"
#include "ventrc/plant.hpp"

namespace ventrc {

struct ScenarioConfig {
  PatientScenario patient;
  CircuitParameters circuit;
};

namespace detail {

template <typename T>
T required(const boost::property_tree::ptree& tree, const std::string& key, const std::string& ctx) {
  try {
    return tree.get<T>(key);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigurationError(ctx + ": " + e.what());
  }
}

template <typename T>
T optional_value(const boost::property_tree::ptree& tree, const std::string& key, T fallback, const std::string& ctx) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigurationError(ctx + ": " + e.what());
  }
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::istream& in, const std::string& ctx = "scenario") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigurationError(ctx + ": " + e.what());
  }
  ScenarioConfig cfg;
  auto& p = cfg.patient;
  p.name = detail::optional_value<std::string>(tree, "patient.name", "unnamed", ctx);
  p.r_lung = detail::required<double>(tree, "patient.r_lung", ctx);
  p.c_lung = detail::required<double>(tree, "patient.c_lung", ctx);
  p.respiratory_rate = detail::required<double>(tree, "ventilator.respiratory_rate", ctx);
  p.peep = detail::required<double>(tree, "ventilator.peep", ctx);
  p.ipap = detail::required<double>(tree, "ventilator.ipap", ctx);
  p.t_insp = detail::required<double>(tree, "ventilator.t_insp", ctx);
  p.t_exp = detail::required<double>(tree, "ventilator.t_exp", ctx);

  auto& c = cfg.circuit;
  const CircuitParameters d;
  c.r_hose = detail::optional_value(tree, "circuit.r_hose", d.r_hose, ctx);
  c.r_leak = detail::optional_value(tree, "circuit.r_leak", d.r_leak, ctx);
  c.blower_time_constant = detail::optional_value(tree, "circuit.blower_time_constant", d.blower_time_constant, ctx);
  c.blower_delay_samples = detail::optional_value(tree, "circuit.blower_delay_samples", d.blower_delay_samples, ctx);
  c.measurement_delay_samples =
      detail::optional_value(tree, "circuit.measurement_delay_samples", d.measurement_delay_samples, ctx);
  c.sample_time = detail::optional_value(tree, "circuit.sample_time", d.sample_time, ctx);

  p.validate();
  c.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path.string());
  return parse_scenario(in, path.string());
}

inline void write_scenario(const std::filesystem::path& path, const ScenarioConfig& cfg) {
  auto out = io::open_for_write(path);
  const auto& p = cfg.patient;
  const auto& c = cfg.circuit;
  out << std::setprecision(15);
  out << "; units: mbar, L, s\n"
      << "[patient]\n"
      << "name = " << p.name << '\n'
      << "r_lung = " << p.r_lung << '\n'
      << "c_lung = " << p.c_lung << "\n\n"
      << "[ventilator]\n"
      << "respiratory_rate = " << p.respiratory_rate << '\n'
      << "peep = " << p.peep << '\n'
      << "ipap = " << p.ipap << '\n'
      << "t_insp = " << p.t_insp << '\n'
      << "t_exp = " << p.t_exp << "\n\n"
      << "[circuit]\n"
      << "r_hose = " << c.r_hose << '\n'
      << "r_leak = " << c.r_leak << '\n'
      << "blower_time_constant = " << c.blower_time_constant << '\n'
      << "blower_delay_samples = " << c.blower_delay_samples << '\n'
      << "measurement_delay_samples = " << c.measurement_delay_samples << '\n'
      << "sample_time = " << c.sample_time << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ventrc
