#pragma once

#include <string>

#include "fbsde/config.hpp"

namespace fbsde {

// Command drivers behind the CLI. Each writes its artifacts plus a
// report.json into `out_dir` (created if missing) and returns a process
// exit status: 0 when every reported check passed.
//
// CSV schemas (17-digit floats, no timestamps, stable row order):
//   density:   x,lower,upper,kde,local_se,pass
//   iota:      t,iota,iota_derivative
//   tails:     target,x,scaled_x,empirical_up,bound_up,empirical_down,
//              bound_down,pass   (target: 0 = y, 1 = z)
//   represent: eps,clock_increment,y_eps,diff_quotient,target,error
//   linear:    t,w,y,z

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& kind, int grid_points);
int cmd_iota(const ExperimentConfig& cfg, const std::string& out_dir,
             int grid_points);
int cmd_solve_pde(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_linear_solve(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_envelope(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_tails(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_transfer(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_represent(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace fbsde
