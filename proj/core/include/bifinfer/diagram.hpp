#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bifinfer/model.hpp"

namespace bifinfer {

/// Non-smooth points of the measure along a branch. Continuation inserts a
/// sample exactly at each one so the trapezoid rule never straddles a kink.
enum class Kink : std::uint8_t { none, det_zero, slope_zero };

struct BranchSample {
  StatePoint z;
  double det = 0.0;        // det(dF/du)
  double slope = 0.0;      // d det / ds along `tangent`
  Eigen::VectorXd tangent; // unit, oriented along sample order
  double ds = 0.0;         // chord length to the previous sample
  double measure = 0.0;    // phi in [0, 1]
  Kink kink = Kink::none;
};

struct Branch {
  std::vector<BranchSample> samples;
  bool closed = false;
  bool truncated = false;  // corrector gave up or max_samples hit
  // Coordinate index of the bound an end lies on (0..N-1 state, N for p), or -1.
  int start_face = -1;
  int end_face = -1;

  double arclength() const {
    double s = 0.0;
    for (const auto& x : samples) s += x.ds;
    return s;
  }
};

struct TraceSettings {
  double step = 0.02;
  int max_samples = 10000;
  double corrector_tol = 1e-10;
  int max_corrector_iterations = 25;
  int interior_seeds = 5;      // p values strictly inside the window used for root seeding
  int root_seeds = 16;         // Latin-hypercube seeds in the state box per p value
  double root_separation = 1e-6;
  int max_backoff = 4;
  double eps_den = 1e-12;
  bool insert_kinks = true;
  std::uint64_t seed = 0x5eed;  // Latin-hypercube stream key
};

/// The branches traced for one theta. Immutable after tracing.
struct Diagram {
  std::vector<Branch> branches;
  ParameterVector theta;
  Interval p_window;
  StateBox box;
  TraceSettings settings;
  bool empty = false;      // no branch was found
  bool truncated = false;  // some branch was cut short

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& b : branches) n += b.samples.size();
    return n;
  }
};

}  // namespace bifinfer
