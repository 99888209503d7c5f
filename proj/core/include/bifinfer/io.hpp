#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bifinfer/detection.hpp"
#include "bifinfer/diagram.hpp"
#include "bifinfer/optimize.hpp"

namespace bifinfer::io {

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

/// One row per sample: branch_id,p,u_1..u_N,det,measure,ds,t_1..t_{N+1}.
std::string diagram_csv(const Diagram& d);

struct CsvSample {
  int branch_id = 0;
  double p = 0.0;
  std::vector<double> u;
  double det = 0.0;
  double measure = 0.0;
  double ds = 0.0;
  std::vector<double> tangent;
};

struct CsvDiagram {
  int state_dim = 0;
  std::vector<std::vector<CsvSample>> branches;  // in file order
};

/// Parses diagram_csv output. Throws DataError on a malformed header or row,
/// or when there are no samples.
CsvDiagram parse_diagram_csv(std::string_view text);

/// {"points":[{p,u,det_slope,dp_dtheta,branch_id}], "degenerate":[...]}
std::string predictions_json(const detection::PredictionSet& p);

/// Array of run records. Wall times are left out so the file is reproducible.
std::string runs_json(const std::vector<optimize::RunRecord>& runs);

/// seed,converged,termination,steps,final_E,final_L,n_predictions,cluster,theta_1..theta_M
std::string summary_csv(const std::vector<optimize::RunRecord>& runs, const optimize::BatchSummary& summary);

}  // namespace bifinfer::io
