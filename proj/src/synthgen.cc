#include "ipromp/synthgen.h"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <random>

#include "ipromp/error.h"

namespace ipromp {
namespace {

constexpr int kMaxDurationDraws = 100;
constexpr int kMaxRetries = 3;

Eigen::VectorXd Vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXd Phases(const TaskSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.human_waypoints.size());
  if (spec.waypoint_phases.size() != 0) return spec.waypoint_phases;
  return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
}

Eigen::VectorXd StateAt(const std::vector<Eigen::VectorXd>& human,
                        const std::vector<Eigen::VectorXd>& robot,
                        const Eigen::VectorXd& phases, double z) {
  const Eigen::Index p = human.front().size();
  const Eigen::Index q = robot.front().size();
  z = std::clamp(z, 0.0, 1.0);
  Eigen::Index seg = 0;
  while (seg + 2 < phases.size() && z > phases[seg + 1]) ++seg;
  const double u = (z - phases[seg]) / (phases[seg + 1] - phases[seg]);
  const double s = MinJerk(std::clamp(u, 0.0, 1.0));
  const auto i = static_cast<size_t>(seg);
  Eigen::VectorXd state(p + q);
  state.head(p) = human[i] + s * (human[i + 1] - human[i]);
  state.tail(q) = robot[i] + s * (robot[i + 1] - robot[i]);
  return state;
}

// Everything the two experiment layouts differ in.
struct Geometry {
  InteractionLayout layout;
  ForwardKinematics kinematics = ForwardKinematics::Passthrough();
  Eigen::VectorXd robot_start;
  Eigen::MatrixXd coupling;  // Q x P
  Eigen::VectorXd robot_offset;
  double robot_gain = 1.0;
  int default_demos = 10;
};

Geometry MakeGeometry(Profile profile) {
  Geometry g;
  if (profile == Profile::kToy) {
    g.layout = {2, 2, {"hand_y", "hand_z", "ee_y", "ee_z"}};
    g.robot_start = Vec({0.5, 0.4});
    g.coupling = Eigen::MatrixXd::Identity(2, 2);
    g.robot_offset = Vec({0.05, 0.0});
    g.default_demos = 10;
    return g;
  }
  g.layout = {3, 7, {"hand_x", "hand_y", "hand_z", "s0", "s1", "e0", "e1", "w0",
                     "w1", "w2"}};
  g.kinematics = ForwardKinematics::PlanarChain(
      {0.27, 0.36, 0.07, 0.37, 0.07, 0.37, 0.23});
  g.robot_start = Vec({0.0, -0.55, 0.0, 0.75, 0.0, 1.26, 0.0});
  g.coupling.resize(7, 3);
  g.coupling << 0.8, 0.3, 0.0,
                0.2, -0.6, 0.4,
                0.0, 0.5, 0.7,
                -0.5, 0.2, 0.3,
                0.3, 0.0, -0.6,
                0.1, 0.7, 0.2,
                -0.2, 0.1, 0.5;
  g.robot_gain = 1.5;
  g.default_demos = 20;
  return g;
}

// Robot waypoints follow the human ones: the first is the robot's rest
// pose, later ones track the human hand through the coupling map.
TaskSpec MakeSpec(const Geometry& g, std::string id,
                  std::vector<Eigen::VectorXd> human, Eigen::VectorXd jitter,
                  double divergence_phase) {
  TaskSpec spec;
  spec.task_id = std::move(id);
  const bool cartesian = g.kinematics.passthrough();
  spec.robot_waypoints.push_back(g.robot_start);
  for (size_t i = 1; i < human.size(); ++i) {
    if (cartesian) {
      spec.robot_waypoints.push_back(human[i] + g.robot_offset);
    } else {
      spec.robot_waypoints.push_back(
          g.robot_start + g.robot_gain * g.coupling * (human[i] - human[0]));
    }
  }
  spec.human_waypoints = std::move(human);
  spec.duration_mean = 4.0;
  spec.duration_std = 0.4;
  spec.sample_rate = 50.0;
  spec.spatial_noise = Eigen::VectorXd::Constant(g.layout.total(), 0.02);
  // Per-segment timing jitter makes a prefix a poor predictor of the overall
  // speed, as with real human demonstrations.
  spec.segment_timing_std = 0.06;
  spec.divergence_phase = divergence_phase;
  spec.waypoint_std = std::move(jitter);
  spec.robot_coupling =
      cartesian ? Eigen::MatrixXd(g.coupling) : Eigen::MatrixXd(g.robot_gain * g.coupling);
  return spec;
}

std::uint64_t TaskSeed(std::uint64_t seed, size_t task, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task),
                    static_cast<std::uint32_t>(attempt)};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Experiment Populate(std::string name, const Geometry& g,
                    std::vector<TaskSpec> specs, int n_demos,
                    std::uint64_t seed, int attempt) {
  Experiment exp;
  exp.name = std::move(name);
  exp.layout = g.layout;
  exp.kinematics = g.kinematics;
  exp.attempts = attempt + 1;
  for (size_t k = 0; k < specs.size(); ++k) {
    TaskDataset ds;
    ds.demos = Generate(specs[k], n_demos, TaskSeed(seed, k, attempt));
    ds.spec = std::move(specs[k]);
    exp.tasks.push_back(std::move(ds));
  }
  return exp;
}

double HumanNoise(const Experiment& exp) {
  const TaskSpec& spec = exp.tasks.front().spec;
  return spec.spatial_noise.head(spec.human_dofs()).maxCoeff();
}

}  // namespace

void TaskSpec::Validate() const {
  if (human_waypoints.size() < 2 ||
      human_waypoints.size() != robot_waypoints.size()) {
    throw ConfigError("synthgen: need >= 2 human waypoints and as many robot ones");
  }
  const Eigen::Index p = human_waypoints.front().size();
  const Eigen::Index q = robot_waypoints.front().size();
  for (size_t i = 0; i < human_waypoints.size(); ++i) {
    if (human_waypoints[i].size() != p || robot_waypoints[i].size() != q) {
      throw ConfigError("synthgen: waypoint dimensions differ");
    }
  }
  if (waypoint_phases.size() != 0) {
    if (waypoint_phases.size() != static_cast<Eigen::Index>(human_waypoints.size()) ||
        waypoint_phases[0] != 0.0 ||
        waypoint_phases[waypoint_phases.size() - 1] != 1.0) {
      throw ConfigError("synthgen: waypoint phases must run from 0 to 1");
    }
    for (Eigen::Index i = 1; i < waypoint_phases.size(); ++i) {
      if (!(waypoint_phases[i] > waypoint_phases[i - 1])) {
        throw ConfigError("synthgen: waypoint phases must increase");
      }
    }
  }
  if (!(duration_mean > 0.0) || duration_std < 0.0 || !(sample_rate > 0.0)) {
    throw ConfigError("synthgen: invalid duration or sample rate");
  }
  if (spatial_noise.size() != p + q || (spatial_noise.array() < 0.0).any()) {
    throw ConfigError("synthgen: spatial_noise needs P + Q non-negative entries");
  }
  if (!(divergence_phase > 0.0 && divergence_phase <= 1.0)) {
    throw ConfigError("synthgen: divergence_phase must lie in (0, 1]");
  }
  if (waypoint_std.size() != 0 &&
      (waypoint_std.size() != static_cast<Eigen::Index>(human_waypoints.size()) ||
       (waypoint_std.array() < 0.0).any())) {
    throw ConfigError("synthgen: waypoint_std needs one entry per waypoint");
  }
  if (segment_timing_std < 0.0) {
    throw ConfigError("synthgen: segment_timing_std must be non-negative");
  }
  if (robot_coupling.size() != 0 &&
      (robot_coupling.rows() != q || robot_coupling.cols() != p)) {
    throw ConfigError("synthgen: robot_coupling must be Q x P");
  }
}

double MinJerk(double u) {
  const double u3 = u * u * u;
  return u3 * (10.0 + u * (-15.0 + 6.0 * u));
}

Eigen::VectorXd NominalState(const TaskSpec& spec, double z) {
  spec.Validate();
  return StateAt(spec.human_waypoints, spec.robot_waypoints, Phases(spec), z);
}

std::vector<Trajectory> Generate(const TaskSpec& spec, int n_demos,
                                 std::uint64_t seed) {
  spec.Validate();
  if (n_demos < 2) throw ConfigError("synthgen: need at least two demos");
  const Eigen::VectorXd phases = Phases(spec);
  const Eigen::Index p = spec.human_dofs();
  const Eigen::Index q = spec.robot_dofs();
  const size_t n_wp = spec.human_waypoints.size();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Trajectory> demos;
  demos.reserve(static_cast<size_t>(n_demos));
  for (int i = 0; i < n_demos; ++i) {
    double duration = spec.duration_mean;
    if (spec.duration_std > 0.0) {
      int draws = 0;
      do {
        if (++draws > kMaxDurationDraws) {
          throw DataError(DataErrorKind::kDomain,
                          "synthgen: could not draw a positive duration");
        }
        duration = spec.duration_mean + spec.duration_std * normal(rng);
      } while (!(duration > 0.0));
    }
    const int steps =
        std::max(2, static_cast<int>(std::lround(duration * spec.sample_rate)) + 1);

    Eigen::VectorXd demo_phases = phases;
    if (spec.segment_timing_std > 0.0) {
      Eigen::VectorXd share = phases.tail(phases.size() - 1) - phases.head(phases.size() - 1);
      for (Eigen::Index s = 0; s < share.size(); ++s) {
        share[s] *= std::exp(spec.segment_timing_std * normal(rng));
      }
      share /= share.sum();
      for (Eigen::Index s = 0; s < share.size(); ++s) {
        demo_phases[s + 1] = demo_phases[s] + share[s];
      }
      demo_phases[demo_phases.size() - 1] = 1.0;
    }

    std::vector<Eigen::VectorXd> human = spec.human_waypoints;
    std::vector<Eigen::VectorXd> robot = spec.robot_waypoints;
    for (size_t w = 0; w < n_wp && spec.waypoint_std.size() != 0; ++w) {
      const double sd = spec.waypoint_std[static_cast<Eigen::Index>(w)];
      if (sd == 0.0) continue;
      Eigen::VectorXd offset(p);
      for (Eigen::Index d = 0; d < p; ++d) offset[d] = sd * normal(rng);
      human[w] += offset;
      if (spec.robot_coupling.size() != 0) robot[w] += spec.robot_coupling * offset;
    }

    Trajectory traj;
    traj.kind = DofKind::kFull;
    traj.timestamps.resize(steps);
    traj.samples.resize(steps, p + q);
    for (int k = 0; k < steps; ++k) {
      traj.timestamps[k] = k / spec.sample_rate;
      const double z = static_cast<double>(k) / (steps - 1);
      traj.samples.row(k) = StateAt(human, robot, demo_phases, z).transpose();
      for (Eigen::Index d = 0; d < p + q; ++d) {
        if (spec.spatial_noise[d] > 0.0) {
          traj.samples(k, d) += spec.spatial_noise[d] * normal(rng);
        }
      }
    }
    demos.push_back(std::move(traj));
  }
  return demos;
}

Profile ParseProfile(const std::string& name) {
  if (name == "toy") return Profile::kToy;
  if (name == "full") return Profile::kFull;
  throw ConfigError("unknown profile '" + name + "' (expected toy or full)");
}

const char* ProfileName(Profile profile) {
  return profile == Profile::kToy ? "toy" : "full";
}

double MinPairwiseGoalDistance(const Experiment& exp) {
  std::vector<Eigen::VectorXd> goals;
  for (const TaskDataset& t : exp.tasks) {
    const Eigen::Index p = t.spec.human_dofs();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    for (const Trajectory& d : t.demos) {
      g += d.samples.row(d.steps() - 1).head(p).transpose();
    }
    goals.push_back(g / static_cast<double>(t.demos.size()));
  }
  double best = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < goals.size(); ++a) {
    for (size_t b = a + 1; b < goals.size(); ++b) {
      best = std::min(best, (goals[a] - goals[b]).norm());
    }
  }
  return best;
}

double MaxPrefixMeanDistance(const Experiment& exp, double phase_limit) {
  // Compare smoothed per-task means: fit every demo with the default basis
  // and average the reconstructions.
  const BasisSystem basis = BasisSystem::Uniform(31);
  const int points = 101;
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(points, 0.0, 1.0);
  std::vector<Eigen::MatrixXd> means;
  for (const TaskDataset& t : exp.tasks) {
    const Eigen::Index p = t.spec.human_dofs();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(points, p);
    for (const Trajectory& d : t.demos) {
      const Eigen::VectorXd w = FitWeights(d, basis);
      mean += Reconstruct(w, basis, z).leftCols(p);
    }
    means.push_back(mean / static_cast<double>(t.demos.size()));
  }
  double worst = 0.0;
  for (int m = 0; m < points && z[m] <= phase_limit; ++m) {
    for (size_t a = 0; a < means.size(); ++a) {
      for (size_t b = a + 1; b < means.size(); ++b) {
        worst = std::max(worst, (means[a].row(m) - means[b].row(m)).norm());
      }
    }
  }
  return worst;
}

Experiment MakeExperiment1(std::uint64_t seed, Profile profile, int n_demos) {
  const Geometry g = MakeGeometry(profile);
  if (n_demos < 0) n_demos = g.default_demos;
  std::vector<std::vector<Eigen::VectorXd>> paths;
  if (profile == Profile::kToy) {
    const Eigen::VectorXd start = Vec({-0.2, -0.3});
    paths = {{start, Vec({0.05, -0.1}), Vec({0.25, 0.0})},
             {start, Vec({-0.15, -0.05}), Vec({-0.2, 0.2})},
             {start, Vec({0.0, 0.05}), Vec({0.1, 0.3})}};
  } else {
    const Eigen::VectorXd start = Vec({0.0, -0.1, -0.3});
    paths = {{start, Vec({0.2, 0.05, -0.05}), Vec({0.45, 0.1, 0.05})},
             {start, Vec({0.2, -0.15, 0.0}), Vec({0.4, -0.2, 0.2})},
             {start, Vec({0.25, 0.0, 0.1}), Vec({0.5, 0.05, 0.3})}};
  }
  const std::vector<std::string> ids = {"box", "glasses", "tape"};
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::vector<TaskSpec> specs;
    for (size_t k = 0; k < ids.size(); ++k) {
      specs.push_back(MakeSpec(g, ids[k], paths[k], Vec({0.0, 0.02, 0.03}), 1.0));
    }
    Experiment exp = Populate("exp1", g, std::move(specs), n_demos, seed, attempt);
    if (MinPairwiseGoalDistance(exp) >= 5.0 * HumanNoise(exp)) return exp;
  }
  throw DataError(DataErrorKind::kDomain,
                  "synthgen: experiment 1 goals not separated after retries");
}

Experiment MakeExperiment2(std::uint64_t seed, Profile profile, int n_demos) {
  const Geometry g = MakeGeometry(profile);
  if (n_demos < 0) n_demos = g.default_demos;
  std::vector<std::vector<Eigen::VectorXd>> paths;
  if (profile == Profile::kToy) {
    const Eigen::VectorXd start = Vec({-0.2, -0.3});
    const Eigen::VectorXd mid = Vec({0.0, 0.0});
    paths = {{start, mid, Vec({0.25, 0.0})},
             {start, mid, Vec({-0.25, 0.0})},
             {start, mid, Vec({0.0, 0.25})},
             {start, mid, Vec({0.0, -0.25})}};
  } else {
    const Eigen::VectorXd start = Vec({0.0, -0.1, -0.3});
    const Eigen::VectorXd mid = Vec({0.3, 0.0, 0.0});
    paths = {{start, mid, Vec({0.45, -0.25, 0.0})},
             {start, mid, Vec({0.45, 0.25, 0.0})},
             {start, mid, Vec({0.45, 0.0, 0.25})},
             {start, mid, Vec({0.45, 0.0, -0.25})}};
  }
  const std::vector<std::string> ids = {"right", "left", "up", "down"};
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::vector<TaskSpec> specs;
    for (size_t k = 0; k < ids.size(); ++k) {
      // The shared midpoint does not jitter, so the prefix stays common.
      specs.push_back(MakeSpec(g, ids[k], paths[k], Vec({0.0, 0.0, 0.03}), 0.5));
    }
    Experiment exp = Populate("exp2", g, std::move(specs), n_demos, seed, attempt);
    const double noise = HumanNoise(exp);
    if (MaxPrefixMeanDistance(exp, 0.4) < noise &&
        MinPairwiseGoalDistance(exp) >= 10.0 * noise) {
      return exp;
    }
  }
  throw DataError(DataErrorKind::kDomain,
                  "synthgen: experiment 2 prefix/divergence checks failed");
}

}  // namespace ipromp
