#ifndef IPROMP_SYNTHGEN_H_
#define IPROMP_SYNTHGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipromp/metrics.h"
#include "ipromp/promp.h"

namespace ipromp {

// One synthetic task family. Human and robot follow minimum-jerk segments
// through their waypoints; segment boundaries sit at waypoint_phases.
struct TaskSpec {
  std::string task_id;
  std::vector<Eigen::VectorXd> human_waypoints;  // each P
  std::vector<Eigen::VectorXd> robot_waypoints;  // each Q, same count
  Eigen::VectorXd waypoint_phases;  // empty: uniform over [0, 1]
  double duration_mean = 4.0;
  double duration_std = 0.0;
  double sample_rate = 50.0;
  Eigen::VectorXd spatial_noise;  // per-DoF std, size P + Q
  // Phase where this family leaves the prefix it shares with its siblings.
  double divergence_phase = 1.0;
  // Per-waypoint std of the demo-to-demo human waypoint offset; the robot
  // waypoint moves by robot_coupling * (human offset).
  Eigen::VectorXd waypoint_std;
  Eigen::MatrixXd robot_coupling;  // Q x P
  // Log-normal std of each segment's share of the demo duration. Zero keeps
  // every demo a uniformly time-scaled copy of the nominal timing.
  double segment_timing_std = 0.0;

  int human_dofs() const { return static_cast<int>(human_waypoints.front().size()); }
  int robot_dofs() const { return static_cast<int>(robot_waypoints.front().size()); }
  // Throws ConfigError on inconsistent fields.
  void Validate() const;
};

// s(u) = 10u^3 - 15u^4 + 6u^5 for u in [0, 1].
double MinJerk(double u);

// Noise-free mean position of the family at phase z (P + Q values).
Eigen::VectorXd NominalState(const TaskSpec& spec, double z);

// n_demos demonstrations sampled at spec.sample_rate. Deterministic in seed.
std::vector<Trajectory> Generate(const TaskSpec& spec, int n_demos,
                                 std::uint64_t seed);

enum class Profile { kToy, kFull };

Profile ParseProfile(const std::string& name);
const char* ProfileName(Profile profile);

struct TaskDataset {
  TaskSpec spec;
  std::vector<Trajectory> demos;
};

struct Experiment {
  std::string name;
  InteractionLayout layout;
  std::vector<TaskDataset> tasks;
  ForwardKinematics kinematics = ForwardKinematics::Passthrough();
  // Generation attempts consumed by the post-generation checks.
  int attempts = 1;
};

// Three unimodal handover analogs (box, glasses, tape).
Experiment MakeExperiment1(std::uint64_t seed, Profile profile = Profile::kToy,
                           int n_demos = -1);
// Four families sharing a prefix up to phase 0.5, then diverging
// right/left/up/down.
Experiment MakeExperiment2(std::uint64_t seed, Profile profile = Profile::kToy,
                           int n_demos = -1);

// Checks used after generation; exposed for tests.
double MinPairwiseGoalDistance(const Experiment& exp);
double MaxPrefixMeanDistance(const Experiment& exp, double phase_limit);

}  // namespace ipromp

#endif  // IPROMP_SYNTHGEN_H_
