#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iucl {

struct GradcheckEntry {
  std::string loss;
  double max_rel_error = 0.0;
  std::size_t points = 0;
};

// Central-difference gradchecks of every loss (soft_count, l_ac, l_ad, l_p,
// l_plrm, l_rec, total) at `points` random points each, kept away from the
// kinks of |.| and max(., 0).
std::vector<GradcheckEntry> loss_gradcheck_suite(std::uint64_t seed, std::size_t points);

}  // namespace iucl
