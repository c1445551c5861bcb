#pragma once

#include <ostream>

namespace ettwin::cli {

/// Kernel, quantization, PSNR-calibration and glint-oracle checks. Returns the
/// number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace ettwin::cli
