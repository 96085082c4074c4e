#pragma once

#include <string>
#include <vector>

#include "tfdm/config.hpp"

namespace tfdm {

struct VerifyCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;   // the quantity compared against the tolerance
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::string to_text() const;
};

// Mathematical property suite over the transform engine, the layers and the
// training machinery. fast keeps every check but trims sizes and sample
// counts to finish within about a minute; full sweeps sizes 1..32 and
// checks every parameter of the mini network, plus an overfit sanity run.
VerifyReport run_verification(bool full, std::uint64_t seed = 7);

// A small network containing every layer type in both domains; used by the
// verification gradient check and by the end-to-end acceptance checks.
NetworkConfig mini_mixture_config();

}  // namespace tfdm
