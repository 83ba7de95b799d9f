#pragma once

#include "grasp/contact.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grasp::records {

/// Bumped whenever the line format changes shape; readers reject other
/// versions by name rather than guessing.
inline constexpr int kFormatVersion = 1;

struct StageTrace {
  std::string stage;  // coarse | fine | final
  int iterations = 0;
  double energy_start = 0.0;
  double energy_end = 0.0;
};

/// One synthesized grasp: pre-grasp, grasp, and squeeze states (layout
/// [9 rotation, 3 translation, n joints]), the final energy report, contact
/// frames at x, and enough provenance to reproduce the run.
struct GraspRecord {
  Eigen::VectorXd x_p;
  Eigen::VectorXd x;
  Eigen::VectorXd x_s;
  double energy_total = 0.0;
  Eigen::VectorXd per_direction;   // lower-level QP value per task direction
  Eigen::MatrixXd contact_forces;  // edge weights, (m * n_edges) x directions
  std::vector<contact::ContactFrame> contacts;
  std::string object_id;
  double object_scale = 1.0;
  std::uint64_t seed = 0;
  int index = 0;  // position within the synthesis batch
  bool failed = false;
  std::string note;
  std::vector<StageTrace> stages;
};

struct RecordError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One JSON object per record, keys sorted, doubles shortest-round-trip, so
/// equal records serialize to equal bytes. NaN becomes null and back.
std::string to_line(const GraspRecord& record);
GraspRecord from_line(const std::string& line);

/// JSON-lines file of records. Reading validates the per-line version and
/// reports the line number on parse failures.
void write_records(const std::string& path, std::span<const GraspRecord> records);
std::vector<GraspRecord> read_records(const std::string& path);

}  // namespace grasp::records
