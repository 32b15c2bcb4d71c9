#pragma once

// Simple robot manufacturing cell: six stations, no buffers, single-slot
// machines. WP1 visits M1, M2, M3; WP2 visits M2, M1, M3.

#include "rmc/cell.hpp"

namespace rmc {

struct SrmcConfig {
  int target_wp1 = 20;
  int target_wp2 = 20;
  int process_time = 1;
  /// 0 selects 200 * (target_wp1 + target_wp2).
  int max_steps = 0;
  std::uint64_t seed = 0;

  CellConfig cell() const { return {{target_wp1, target_wp2}, process_time, max_steps, seed}; }
};

inline Layout srmc_layout() {
  using S = StationId;
  return Layout("srmc", {S::IB1, S::IB2, S::M1, S::M2, S::M3, S::OB},
                {std::vector<S>{S::IB1, S::M1, S::M2, S::M3, S::OB},
                 std::vector<S>{S::IB2, S::M2, S::M1, S::M3, S::OB}});
}

class SrmcEnv : public Cell {
 public:
  explicit SrmcEnv(const SrmcConfig& cfg) : Cell(srmc_layout(), cfg.cell()) {}
};

}  // namespace rmc
