#pragma once

#include <string>
#include <vector>

namespace fearec::checks {

enum class Fault { none, fft_sign };
Fault parse_fault(const std::string& name);  // "none" or "fft-sign"

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Suites: spectral (transform against a direct DFT, round trip, correlation
// against the lag-sum definition), ramp (band coverage and widths),
// gradient (finite-difference checks), metrics (rank and metric identities).
// With Fault::fft_sign the spectral suite runs against a conjugated forward
// transform.
std::vector<SuiteResult> run_all(Fault fault = Fault::none, unsigned seed = 1);

}  // namespace fearec::checks
