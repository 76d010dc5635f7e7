#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emf::cli {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Gradient checks, RevIN round trip and the conformal rank oracle.
std::vector<SelftestCheck> run_selftest();

/// Writes daily_cycle.csv (240-sample cycle + 0.1 noise) and two_cycle.csv
/// (240- and 120-sample cycles) into dir. Returns the written paths.
std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& dir, std::size_t length,
                                                  std::uint64_t seed);

}  // namespace emf::cli
