#pragma once

#include <cstdint>
#include <string>

namespace grasp {

/// ADMM QP solver settings.
struct QpParams {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int max_iters = 500;
  double eps_primal = 1e-5;
  double eps_dual = 1e-5;
  int check_interval = 10;  // residuals are tested every this many sweeps
};

/// Contact model: friction pyramid geometry.
struct ContactParams {
  double mu = 0.6;   // tangential friction coefficient
  int n_edges = 8;   // pyramid edges per contact
};

/// Grasp-energy shaping.
struct EnergyParams {
  double beta = 10.0;             // target wrench magnitude scale
  double gamma_per_contact = 0.1; // total-weight floor, scaled by contact count
};

/// Per-term weights of the synthesis objective.
struct ObjectiveWeights {
  double grasp = 1.0;
  double distance = 100.0;
  double joint_limit = 10.0;
  double self_penetration = 10.0;
  double object_penetration = 10.0;
};

/// Gradient-descent schedule for one synthesis stage.
struct StageSchedule {
  int iters = 300;
  double step_rotation = 0.010;
  double step_translation = 0.0025;
  double step_joints = 0.010;
  double step_floor = 0.1;  // cosine decay ends at this fraction of the base step
};

/// Full synthesis schedule: sphere-proxy stage, mesh stage, offset-free stage.
struct PipelineParams {
  StageSchedule coarse{300, 0.010, 0.0025, 0.010, 0.1};
  StageSchedule fine{100, 0.004, 0.0010, 0.004, 0.1};
  StageSchedule final_stage{100, 0.004, 0.0010, 0.004, 0.1};
  double contact_offset = 0.01;  // distance-energy standoff before the last stage [m]
  double fd_step = 1e-6;         // central-difference step for surface frames [m]
  bool skip_fine_stages = false;  // ablation: stop after the sphere-proxy stage
};

/// Initial-pose sampling.
struct InitParams {
  double standoff = 0.10;        // palm distance beyond the object bounding sphere [m]
  double joint_span_fraction = 0.25;  // uniform jitter half-width as a span fraction
};

/// Grasp evaluation thresholds.
struct EvalParams {
  double mass = 0.03;              // object mass [kg]
  double gravity = 9.8;            // [m/s^2]
  double residual_rel_tol = 1e-3;  // wrench residual tolerance vs gravity wrench
  double force_budget_factor = 20.0;  // total normal force cap, in units of m*g
  double contact_tol = 0.002;      // fingertip-to-surface attach distance [m]
  double penetration_tol = 0.003;  // max tolerated object penetration [m]
  double qp_eps = 1e-8;            // tighter ADMM tolerance for evaluation QPs
};

/// Everything a synthesis run needs, bundled for serialization.
struct RunConfig {
  QpParams qp;
  ContactParams contact;
  EnergyParams energy;
  ObjectiveWeights weights;
  PipelineParams pipeline;
  InitParams init;
  EvalParams eval;
  std::uint64_t seed = 0;
  int batch = 64;
  int workers = 1;
};

/// Parses a JSON document into a RunConfig. Missing fields keep their
/// defaults; unknown fields are rejected so typos cannot silently pass.
RunConfig parse_run_config(const std::string& json_text);

/// Serializes every field (round-trips through parse_run_config).
std::string dump_run_config(const RunConfig& cfg);

/// Validates ranges (positivity, iteration counts, relaxation bounds).
/// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& cfg);

}  // namespace grasp
